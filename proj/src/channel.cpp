// SPDX-License-Identifier: Apache-2.0

#include "rfsim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfsim {

namespace {

constexpr double kDeg = kPi / 180.0;

// Unit polarization vector (global frame) of element `index` for a wave along `direction`.
Vec3 element_polarization(const AntennaArray& array, int index, const Vec3& direction) {
  const Eigen::Matrix3d rot = array.rotation();
  const Vec3 local = rot.transpose() * direction;
  const auto basis = em::angular_basis<double>(local);
  const double slant = array.slant_of(index);
  return rot * (std::cos(slant) * basis.e1 + std::sin(slant) * basis.e2);
}

std::complex<double> unit_phase_cycles(double cycles) {
  return std::polar(1.0, 2.0 * kPi * (cycles - std::floor(cycles)));
}

}  // namespace

AntennaArray AntennaArray::single(const Vec3& position) {
  AntennaArray a;
  a.position = position;
  return a;
}

AntennaArray AntennaArray::upa(int rows, int cols, double spacing_v, double spacing_h,
                               ArrayPolarization polarization, ArrayPlane plane,
                               const Vec3& position) {
  AntennaArray a;
  a.layout = ArrayLayout::UPA;
  a.rows = rows;
  a.cols = cols;
  a.spacing_v = spacing_v;
  a.spacing_h = spacing_h;
  a.polarization = polarization;
  a.plane = plane;
  a.position = position;
  a.validate();
  return a;
}

double AntennaArray::slant_of(int index) const {
  if (polarization == ArrayPolarization::Single) return 0.0;
  return (index < rows * cols ? 1.0 : -1.0) * cross_slant_deg * kDeg;
}

Eigen::Matrix3d AntennaArray::rotation() const {
  return (Eigen::AngleAxisd(orientation_deg.x() * kDeg, Vec3::UnitZ()) *
          Eigen::AngleAxisd(orientation_deg.y() * kDeg, Vec3::UnitY()) *
          Eigen::AngleAxisd(orientation_deg.z() * kDeg, Vec3::UnitX()))
      .toRotationMatrix();
}

void AntennaArray::validate() const {
  if (rows < 1 || cols < 1) throw std::invalid_argument("array rows and cols must be >= 1");
  if (layout == ArrayLayout::Single && (rows != 1 || cols != 1))
    throw std::invalid_argument("single-element layout must be 1x1");
  if (!(spacing_v > 0.0) || !(spacing_h > 0.0))
    throw std::invalid_argument("array element spacing must be positive");
  if (!position.allFinite() || !orientation_deg.allFinite())
    throw std::invalid_argument("array pose must be finite");
}

bool AntennaArray::operator==(const AntennaArray& o) const {
  return layout == o.layout && rows == o.rows && cols == o.cols && spacing_v == o.spacing_v &&
         spacing_h == o.spacing_h && polarization == o.polarization &&
         cross_slant_deg == o.cross_slant_deg && plane == o.plane &&
         orientation_deg == o.orientation_deg && position == o.position;
}

double OfdmGrid::subcarrier_frequency(int k) const {
  return carrier_frequency + (k - subcarrier_count / 2) * subcarrier_spacing;
}

void OfdmGrid::validate() const {
  if (!(carrier_frequency > 0.0)) throw std::invalid_argument("ofdm.carrier_frequency must be positive");
  if (subcarrier_count < 1) throw std::invalid_argument("ofdm.subcarrier_count must be >= 1");
  if (!(subcarrier_spacing > 0.0)) throw std::invalid_argument("ofdm.subcarrier_spacing must be positive");
  if (bandwidth() / 2.0 >= carrier_frequency)
    throw std::invalid_argument("ofdm bandwidth must stay below twice the carrier");
}

std::vector<Vec3> element_positions(const AntennaArray& array, double wavelength) {
  if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be positive");
  const Eigen::Matrix3d rot = array.rotation();
  Vec3 col_axis, row_axis;
  switch (array.plane) {
    case ArrayPlane::YZ: col_axis = Vec3::UnitY(); row_axis = Vec3::UnitZ(); break;
    case ArrayPlane::XZ: col_axis = Vec3::UnitX(); row_axis = Vec3::UnitZ(); break;
    case ArrayPlane::XY: col_axis = Vec3::UnitX(); row_axis = Vec3::UnitY(); break;
  }
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(array.element_count()));
  for (int pol = 0; pol < array.polarization_count(); ++pol) {
    for (int r = 0; r < array.rows; ++r) {
      for (int c = 0; c < array.cols; ++c) {
        const double h = (c - 0.5 * (array.cols - 1)) * array.spacing_h * wavelength;
        const double v = (r - 0.5 * (array.rows - 1)) * array.spacing_v * wavelength;
        out.push_back(array.position + rot * (h * col_axis + v * row_axis));
      }
    }
  }
  return out;
}

void check_narrowband(const AntennaArray& tx, const AntennaArray& rx, const OfdmGrid& grid) {
  const double limit = 0.1 * kSpeedOfLight / grid.bandwidth();
  for (const AntennaArray* a : {&tx, &rx}) {
    const auto pos = element_positions(*a, grid.wavelength());
    double aperture = 0.0;
    for (const auto& p : pos)
      for (const auto& q : pos) aperture = std::max(aperture, (p - q).norm());
    if (aperture > limit)
      throw std::invalid_argument("array aperture " + std::to_string(aperture) +
                                  " m violates the narrowband limit " + std::to_string(limit) + " m");
  }
}

Eigen::Vector2d element_response(const AntennaArray& array, int index, const Vec3& direction) {
  const Vec3 p = element_polarization(array, index, direction);
  const auto basis = em::angular_basis<double>(direction);
  return {basis.e1.dot(p), basis.e2.dot(p)};
}

std::complex<double> path_tap_gain(const PropagationPath& path, const AntennaArray& tx_array,
                                   int m, const AntennaArray& rx_array, int n, double wavelength,
                                   const std::vector<Vec3>& tx_offsets,
                                   const std::vector<Vec3>& rx_offsets) {
  const Eigen::Vector2d u_tx = element_response(tx_array, m, path.departure);
  // The receive pattern is evaluated toward the source; project it on the arriving wave's basis.
  const Vec3 p_rx = element_polarization(rx_array, n, -path.arrival);
  const auto arr = em::angular_basis<double>(path.arrival);
  const Eigen::Vector2d u_rx(arr.e1.dot(p_rx), arr.e2.dot(p_rx));

  const std::complex<double> pol =
      u_rx.cast<std::complex<double>>().transpose() * path.transfer * u_tx.cast<std::complex<double>>();
  // Elements displaced along the departure direction (or toward the source) see a shorter path.
  const double cycles = tx_offsets[static_cast<std::size_t>(m)].dot(path.departure) / wavelength -
                        rx_offsets[static_cast<std::size_t>(n)].dot(path.arrival) / wavelength;
  return pol * unit_phase_cycles(cycles);
}

namespace {

std::vector<Vec3> offsets_of(const AntennaArray& array, double wavelength) {
  auto pos = element_positions(array, wavelength);
  for (auto& p : pos) p -= array.position;
  return pos;
}

template <typename Visit>
void for_each_tap(const std::vector<PropagationPath>& paths, const AntennaArray& tx_array,
                  const AntennaArray& rx_array, const OfdmGrid& grid, Visit&& visit) {
  const double wavelength = grid.wavelength();
  const auto tx_off = offsets_of(tx_array, wavelength);
  const auto rx_off = offsets_of(rx_array, wavelength);
  const int n_tx = tx_array.element_count();
  for (const auto& path : paths) {
    if (path.frequency_hz != grid.carrier_frequency)
      throw std::invalid_argument("path reference frequency differs from the OFDM carrier");
    for (int n = 0; n < rx_array.element_count(); ++n)
      for (int m = 0; m < n_tx; ++m)
        visit(n * n_tx + m, path,
              path_tap_gain(path, tx_array, m, rx_array, n, wavelength, tx_off, rx_off));
  }
}

}  // namespace

CsiFrame synthesize_csi(const std::vector<PropagationPath>& paths, const AntennaArray& tx_array,
                        const AntennaArray& rx_array, const OfdmGrid& grid) {
  tx_array.validate();
  rx_array.validate();
  grid.validate();
  CsiFrame frame;
  frame.tx_elements = tx_array.element_count();
  frame.rx_elements = rx_array.element_count();
  frame.rx_position = rx_array.position;
  frame.path_count = static_cast<int>(paths.size());
  frame.h = Eigen::MatrixXcd::Zero(frame.tx_elements * frame.rx_elements, grid.subcarrier_count);

  std::vector<double> offsets(static_cast<std::size_t>(grid.subcarrier_count));
  for (int k = 0; k < grid.subcarrier_count; ++k)
    offsets[static_cast<std::size_t>(k)] = grid.subcarrier_frequency(k) - grid.carrier_frequency;

  Eigen::RowVectorXcd phasor(grid.subcarrier_count);
  const PropagationPath* current = nullptr;
  for_each_tap(paths, tx_array, rx_array, grid,
               [&](int row, const PropagationPath& path, std::complex<double> gain) {
                 if (current != &path) {
                   current = &path;
                   for (int k = 0; k < grid.subcarrier_count; ++k)
                     phasor(k) = std::polar(1.0, -2.0 * kPi * offsets[static_cast<std::size_t>(k)] * path.delay);
                 }
                 frame.h.row(row) += gain * phasor;
               });
  return frame;
}

Cir export_cir(const std::vector<PropagationPath>& paths, const AntennaArray& tx_array,
               const AntennaArray& rx_array, const OfdmGrid& grid) {
  Cir cir;
  cir.reference_frequency = grid.carrier_frequency;
  cir.taps.resize(static_cast<std::size_t>(tx_array.element_count() * rx_array.element_count()));
  for_each_tap(paths, tx_array, rx_array, grid,
               [&](int row, const PropagationPath& path, std::complex<double> gain) {
                 cir.taps[static_cast<std::size_t>(row)].push_back({path.delay, gain});
               });
  for (auto& list : cir.taps)
    std::stable_sort(list.begin(), list.end(), [](const Tap& a, const Tap& b) { return a.delay < b.delay; });
  return cir;
}

Eigen::MatrixXcd csi_from_cir(const Cir& cir, const OfdmGrid& grid) {
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(cir.taps.size()), grid.subcarrier_count);
  for (std::size_t row = 0; row < cir.taps.size(); ++row)
    for (const auto& tap : cir.taps[row])
      for (int k = 0; k < grid.subcarrier_count; ++k)
        h(static_cast<Eigen::Index>(row), k) +=
            tap.gain * std::polar(1.0, -2.0 * kPi * (grid.subcarrier_frequency(k) - cir.reference_frequency) * tap.delay);
  return h;
}

}  // namespace rfsim
