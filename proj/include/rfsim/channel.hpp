// SPDX-License-Identifier: Apache-2.0
//
// MIMO-OFDM channel synthesis from propagation paths.

#pragma once

#include <Eigen/Dense>

#include <vector>

#include "rfsim/geometry.hpp"
#include "rfsim/path_solver.hpp"

namespace rfsim {

enum class ArrayLayout { Single, UPA };
enum class ArrayPolarization { Single, CrossPolarized };
enum class ArrayPlane { YZ, XZ, XY };

/// Planar array of isotropic elements. Spacings are in wavelengths. Elements are ordered
/// polarization-major, then row-major over the grid: index = pol * rows * cols + row * cols + col.
/// Row 0 is the lowest row; the grid is centred on `position`.
struct AntennaArray {
  ArrayLayout layout = ArrayLayout::Single;
  int rows = 1;
  int cols = 1;
  double spacing_v = 0.5;
  double spacing_h = 0.5;
  ArrayPolarization polarization = ArrayPolarization::Single;
  double cross_slant_deg = 45.0;  // cross-polarized pairs are +slant / -slant
  ArrayPlane plane = ArrayPlane::YZ;
  Vec3 orientation_deg = Vec3::Zero();  // yaw (z), pitch (y), roll (x)
  Vec3 position = Vec3::Zero();

  static AntennaArray single(const Vec3& position);
  static AntennaArray upa(int rows, int cols, double spacing_v, double spacing_h,
                          ArrayPolarization polarization, ArrayPlane plane, const Vec3& position);

  int polarization_count() const { return polarization == ArrayPolarization::CrossPolarized ? 2 : 1; }
  int positions_per_polarization() const { return rows * cols; }
  int element_count() const { return rows * cols * polarization_count(); }

  /// Slant angle (rad) of element `index`, measured from theta_hat toward phi_hat.
  double slant_of(int index) const;
  Eigen::Matrix3d rotation() const;
  void validate() const;
  bool operator==(const AntennaArray&) const;
};

struct OfdmGrid {
  double carrier_frequency = 3.5e9;
  int subcarrier_count = 64;
  double subcarrier_spacing = 240e3;

  double bandwidth() const { return subcarrier_count * subcarrier_spacing; }
  double wavelength() const { return kSpeedOfLight / carrier_frequency; }
  /// f_k = carrier + (k - count / 2) * spacing.
  double subcarrier_frequency(int k) const;
  void validate() const;
  bool operator==(const OfdmGrid&) const = default;
};

/// Ideal CSI for one receiver position. Rows are (rx element, tx element) pairs, rx-major;
/// with a single receive element the row index is the transmit element.
struct CsiFrame {
  Eigen::MatrixXcd h;
  int tx_elements = 0;
  int rx_elements = 1;
  Vec3 rx_position = Vec3::Zero();
  double timestamp = 0.0;
  int path_count = 0;

  double energy() const { return h.squaredNorm(); }
};

std::vector<Vec3> element_positions(const AntennaArray& array, double wavelength);

/// Narrowband validity: the larger aperture must stay below a tenth of c / bandwidth.
void check_narrowband(const AntennaArray& tx, const AntennaArray& rx, const OfdmGrid& grid);

/// Polarization response (theta, phi components in the global angular basis of `direction`) of
/// element `index` radiating toward / receiving from `direction`.
Eigen::Vector2d element_response(const AntennaArray& array, int index, const Vec3& direction);

/// Narrowband complex gain of one path between transmit element m and receive element n at the
/// carrier; keeps the path's propagation phase.
std::complex<double> path_tap_gain(const PropagationPath& path, const AntennaArray& tx_array,
                                   int m, const AntennaArray& rx_array, int n, double wavelength,
                                   const std::vector<Vec3>& tx_offsets,
                                   const std::vector<Vec3>& rx_offsets);

/// H[row, k] = sum_p a_p(row) exp(-j 2 pi (f_k - f_ref) tau_p). a_p is the path transfer at
/// f_ref projected on both element polarizations, times the array phase.
CsiFrame synthesize_csi(const std::vector<PropagationPath>& paths, const AntennaArray& tx_array,
                        const AntennaArray& rx_array, const OfdmGrid& grid);

struct Tap {
  double delay = 0.0;
  std::complex<double> gain;
};

/// Taps per (rx, tx) element pair, same row order as CsiFrame::h. Each list is sorted by delay.
struct Cir {
  std::vector<std::vector<Tap>> taps;
  double reference_frequency = 0.0;
};

Cir export_cir(const std::vector<PropagationPath>& paths, const AntennaArray& tx_array,
               const AntennaArray& rx_array, const OfdmGrid& grid);

/// Frequency response of taps on the grid: sum g exp(-j 2 pi (f_k - f_ref) tau).
Eigen::MatrixXcd csi_from_cir(const Cir& cir, const OfdmGrid& grid);

}  // namespace rfsim
