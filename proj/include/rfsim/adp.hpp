// SPDX-License-Identifier: Apache-2.0
//
// Angle-delay profiles and a nearest-neighbour fingerprint localizer built on them.
//
// Axis conventions: the angle axis is a forward DFT over the transmit elements of one
// polarization block (row-major UPA vectorization), the delay axis an inverse DFT over
// subcarriers, so a path of delay tau lands in delay bin tau * spacing * delay_fft (mod
// delay_fft). The transform is scaled by 1 / sqrt(angle_fft * delay_fft), which makes it unitary
// and preserves energy including under zero padding.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "rfsim/channel.hpp"

namespace rfsim {

struct AngleDelayProfile {
  Eigen::MatrixXd magnitude;  // [angle_fft x delay_fft]
  int angle_fft = 0;
  int delay_fft = 0;
  int block = 0;  // polarization block of the source frame

  double energy() const { return magnitude.squaredNorm(); }
};

/// Complex unitary 2D transform of a [elements x subcarriers] block (zero padded).
Eigen::MatrixXcd angle_delay_transform(const Eigen::MatrixXcd& csi, int angle_fft, int delay_fft);

AngleDelayProfile compute_adp(const Eigen::MatrixXcd& csi, int angle_fft, int delay_fft);

/// ADP of polarization block `block` of the first receive element's rows.
AngleDelayProfile compute_adp(const CsiFrame& frame, int polarization_blocks, int angle_fft,
                              int delay_fft, int block);

/// One ADP per polarization block, in block order.
std::vector<AngleDelayProfile> compute_adp_blocks(const CsiFrame& frame, int polarization_blocks,
                                                  int angle_fft, int delay_fft);

/// Non-coherent combination sqrt(sum_b |A_b|^2) across blocks.
AngleDelayProfile combine_blocks(const std::vector<AngleDelayProfile>& blocks);

/// Pearson correlation of the magnitude tensors clipped to [0, 1]. Throws on shape mismatch,
/// zero energy, or a constant tensor.
double adp_similarity(const AngleDelayProfile& a, const AngleDelayProfile& b);

/// Index of the largest magnitude (first in column-major order on ties).
std::pair<int, int> adp_peak(const AngleDelayProfile& adp);

/// Bins that are strict maxima of their 8-neighbourhood (cyclic) and above `floor_fraction`
/// of the global peak, sorted by decreasing magnitude.
std::vector<std::pair<int, int>> adp_local_maxima(const AngleDelayProfile& adp, double floor_fraction);

// -- export ------------------------------------------------------------------------

/// Binary 8-bit PGM; dB scale over `dynamic_range_db` below the peak, zero input -> all black.
std::string adp_to_pgm(const Eigen::MatrixXd& magnitude, double dynamic_range_db = 60.0);

/// Raw little-endian tensor: magic, JSON header with axis conventions, float64 column data.
void save_adp_raw(const std::string& path, const std::vector<AngleDelayProfile>& blocks);
std::vector<AngleDelayProfile> load_adp_raw(const std::string& path);

// -- fingerprinting ----------------------------------------------------------------------

inline constexpr double kFingerprintFloorDb = -60.0;

/// Flattened log-magnitude ADP (dB relative to the peak, floored at -60 dB).
Eigen::VectorXd adp_feature(const AngleDelayProfile& adp);

struct FingerprintDb {
  Eigen::MatrixXd features;  // one standardized row per entry
  std::vector<Vec3> positions;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;
  int angle_fft = 0;
  int delay_fft = 0;
  int polarization_blocks = 1;

  std::size_t size() const { return positions.size(); }
  Eigen::RowVectorXd standardize(const Eigen::VectorXd& raw) const;
};

/// Standardizes raw feature rows; a zero-variance feature keeps unit scale.
FingerprintDb build_fingerprint_db(const Eigen::MatrixXd& raw_features, std::vector<Vec3> positions,
                                   int angle_fft, int delay_fft, int polarization_blocks);

/// Raw (unstandardized) feature of a frame under the db's transform settings.
Eigen::VectorXd frame_feature(const CsiFrame& frame, int polarization_blocks, int angle_fft,
                              int delay_fft);

struct LocalizationResult {
  Vec3 estimate = Vec3::Zero();
  std::vector<std::size_t> neighbours;  // nearest first
  std::vector<double> distances;        // feature-space distances
};

/// Inverse-distance-weighted mean of the k nearest entries; ties broken by entry index. An exact
/// feature match returns the matched position.
LocalizationResult localize_nn(const FingerprintDb& db, const Eigen::VectorXd& raw_query, int k);
LocalizationResult localize_nn(const FingerprintDb& db, const CsiFrame& query, int k);

}  // namespace rfsim
