// SPDX-License-Identifier: Apache-2.0

#include "rfsim/adp.hpp"

#include <unsupported/Eigen/FFT>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rfsim {

namespace {

constexpr char kAdpMagic[8] = {'R', 'F', 'S', 'A', 'D', 'P', '\0', '\1'};

// Unnormalized forward DFT of each column, in place.
void fft_columns(Eigen::MatrixXcd& m, Eigen::FFT<double>& fft) {
  std::vector<std::complex<double>> in(static_cast<std::size_t>(m.rows())), out;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) in[static_cast<std::size_t>(r)] = m(r, c);
    fft.fwd(out, in);
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = out[static_cast<std::size_t>(r)];
  }
}

// Unnormalized inverse DFT (e^{+j}) of each row, in place.
void ifft_rows(Eigen::MatrixXcd& m, Eigen::FFT<double>& fft) {
  std::vector<std::complex<double>> in(static_cast<std::size_t>(m.cols())), out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) in[static_cast<std::size_t>(c)] = std::conj(m(r, c));
    fft.fwd(out, in);
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::conj(out[static_cast<std::size_t>(c)]);
  }
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("ADP file truncated");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

}  // namespace

Eigen::MatrixXcd angle_delay_transform(const Eigen::MatrixXcd& csi, int angle_fft, int delay_fft) {
  if (angle_fft < 1 || delay_fft < 1) throw std::invalid_argument("FFT sizes must be positive");
  if (csi.rows() > angle_fft || csi.cols() > delay_fft)
    throw std::invalid_argument("CSI block " + std::to_string(csi.rows()) + "x" +
                                std::to_string(csi.cols()) + " exceeds FFT size " +
                                std::to_string(angle_fft) + "x" + std::to_string(delay_fft));
  Eigen::MatrixXcd grid = Eigen::MatrixXcd::Zero(angle_fft, delay_fft);
  grid.topLeftCorner(csi.rows(), csi.cols()) = csi;
  Eigen::FFT<double> fft;
  fft_columns(grid, fft);
  ifft_rows(grid, fft);
  grid /= std::sqrt(static_cast<double>(angle_fft) * delay_fft);
  return grid;
}

AngleDelayProfile compute_adp(const Eigen::MatrixXcd& csi, int angle_fft, int delay_fft) {
  AngleDelayProfile adp;
  adp.magnitude = angle_delay_transform(csi, angle_fft, delay_fft).cwiseAbs();
  adp.angle_fft = angle_fft;
  adp.delay_fft = delay_fft;
  return adp;
}

AngleDelayProfile compute_adp(const CsiFrame& frame, int polarization_blocks, int angle_fft,
                              int delay_fft, int block) {
  if (polarization_blocks < 1 || frame.tx_elements % polarization_blocks != 0)
    throw std::invalid_argument("transmit elements do not split into polarization blocks");
  if (block < 0 || block >= polarization_blocks) throw std::out_of_range("polarization block");
  const int per_block = frame.tx_elements / polarization_blocks;
  AngleDelayProfile adp =
      compute_adp(frame.h.middleRows(static_cast<Eigen::Index>(block) * per_block, per_block),
                  angle_fft, delay_fft);
  adp.block = block;
  return adp;
}

std::vector<AngleDelayProfile> compute_adp_blocks(const CsiFrame& frame, int polarization_blocks,
                                                  int angle_fft, int delay_fft) {
  std::vector<AngleDelayProfile> out;
  for (int b = 0; b < polarization_blocks; ++b)
    out.push_back(compute_adp(frame, polarization_blocks, angle_fft, delay_fft, b));
  return out;
}

AngleDelayProfile combine_blocks(const std::vector<AngleDelayProfile>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("no ADP blocks to combine");
  AngleDelayProfile out = blocks.front();
  Eigen::MatrixXd power = Eigen::MatrixXd::Zero(out.magnitude.rows(), out.magnitude.cols());
  for (const auto& b : blocks) {
    if (b.magnitude.rows() != power.rows() || b.magnitude.cols() != power.cols())
      throw std::invalid_argument("ADP blocks differ in shape");
    power += b.magnitude.cwiseAbs2();
  }
  out.magnitude = power.cwiseSqrt();
  out.block = -1;
  return out;
}

double adp_similarity(const AngleDelayProfile& a, const AngleDelayProfile& b) {
  if (a.magnitude.rows() != b.magnitude.rows() || a.magnitude.cols() != b.magnitude.cols())
    throw std::invalid_argument("ADP shape mismatch");
  if (a.energy() == 0.0 || b.energy() == 0.0) throw std::invalid_argument("zero-energy ADP");
  const Eigen::ArrayXXd ca = a.magnitude.array() - a.magnitude.mean();
  const Eigen::ArrayXXd cb = b.magnitude.array() - b.magnitude.mean();
  const double na = std::sqrt((ca * ca).sum());
  const double nb = std::sqrt((cb * cb).sum());
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("constant ADP has no correlation");
  return std::clamp((ca * cb).sum() / (na * nb), 0.0, 1.0);
}

std::pair<int, int> adp_peak(const AngleDelayProfile& adp) {
  Eigen::Index r = 0, c = 0;
  adp.magnitude.maxCoeff(&r, &c);
  return {static_cast<int>(r), static_cast<int>(c)};
}

std::vector<std::pair<int, int>> adp_local_maxima(const AngleDelayProfile& adp, double floor_fraction) {
  const auto& m = adp.magnitude;
  const double floor = floor_fraction * m.maxCoeff();
  const int rows = static_cast<int>(m.rows()), cols = static_cast<int>(m.cols());
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double v = m(r, c);
      if (v <= floor) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (m((r + dr + rows) % rows, (c + dc + cols) % cols) >= v) {
            is_max = false;
            break;
          }
        }
      if (is_max) out.emplace_back(r, c);
    }
  }
  std::sort(out.begin(), out.end(), [&](auto x, auto y) { return m(x.first, x.second) > m(y.first, y.second); });
  return out;
}

std::string adp_to_pgm(const Eigen::MatrixXd& magnitude, double dynamic_range_db) {
  const auto rows = magnitude.rows(), cols = magnitude.cols();
  std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  const double peak = magnitude.size() ? magnitude.maxCoeff() : 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      unsigned char px = 0;
      if (peak > 0.0 && magnitude(r, c) > 0.0) {
        const double db = 20.0 * std::log10(magnitude(r, c) / peak);
        const double level = std::clamp(1.0 + db / dynamic_range_db, 0.0, 1.0);
        px = static_cast<unsigned char>(std::lround(255.0 * level));
      }
      out.push_back(static_cast<char>(px));
    }
  }
  return out;
}

void save_adp_raw(const std::string& path, const std::vector<AngleDelayProfile>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("no ADP blocks to save");
  nlohmann::json header{
      {"format", "rfsim-adp"},
      {"version", 1},
      {"blocks", blocks.size()},
      {"angle_bins", blocks.front().angle_fft},
      {"delay_bins", blocks.front().delay_fft},
      {"dtype", "float64-le"},
      {"layout", "block-major, then column-major [angle x delay]"},
      {"angle_axis", "forward DFT over transmit elements of one polarization block, row-major UPA order"},
      {"delay_axis", "inverse DFT over subcarriers; bin = tau * subcarrier_spacing * delay_bins"},
      {"normalization", "unitary, 1/sqrt(angle_bins * delay_bins)"}};
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os.write(kAdpMagic, sizeof kAdpMagic);
  put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : blocks) {
    if (b.angle_fft != blocks.front().angle_fft || b.delay_fft != blocks.front().delay_fft)
      throw std::invalid_argument("ADP blocks differ in shape");
    // Eigen storage is column-major and the host is little-endian (checked at build time).
    os.write(reinterpret_cast<const char*>(b.magnitude.data()),
             static_cast<std::streamsize>(b.magnitude.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<AngleDelayProfile> load_adp_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kAdpMagic))
    throw std::runtime_error("'" + path + "' is not an ADP tensor file");
  std::string text(get_u32(is), '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(text.size())))
    throw std::runtime_error("ADP file truncated");
  const auto header = nlohmann::json::parse(text);
  const int blocks = header.at("blocks").get<int>();
  const int rows = header.at("angle_bins").get<int>();
  const int cols = header.at("delay_bins").get<int>();
  std::vector<AngleDelayProfile> out;
  for (int b = 0; b < blocks; ++b) {
    AngleDelayProfile adp;
    adp.magnitude.resize(rows, cols);
    adp.angle_fft = rows;
    adp.delay_fft = cols;
    adp.block = b;
    if (!is.read(reinterpret_cast<char*>(adp.magnitude.data()),
                 static_cast<std::streamsize>(adp.magnitude.size() * sizeof(double))))
      throw std::runtime_error("ADP file truncated");
    out.push_back(std::move(adp));
  }
  return out;
}

Eigen::VectorXd adp_feature(const AngleDelayProfile& adp) {
  const double peak = adp.magnitude.size() ? adp.magnitude.maxCoeff() : 0.0;
  Eigen::VectorXd out(adp.magnitude.size());
  for (Eigen::Index i = 0; i < adp.magnitude.size(); ++i) {
    const double v = adp.magnitude.data()[i];
    out(i) = (peak > 0.0 && v > 0.0)
                 ? std::max(kFingerprintFloorDb, 20.0 * std::log10(v / peak))
                 : kFingerprintFloorDb;
  }
  return out;
}

Eigen::VectorXd frame_feature(const CsiFrame& frame, int polarization_blocks, int angle_fft,
                              int delay_fft) {
  return adp_feature(combine_blocks(compute_adp_blocks(frame, polarization_blocks, angle_fft, delay_fft)));
}

Eigen::RowVectorXd FingerprintDb::standardize(const Eigen::VectorXd& raw) const {
  if (raw.size() != mean.size()) throw std::invalid_argument("feature length mismatch");
  return (raw.transpose() - mean).cwiseQuotient(scale);
}

FingerprintDb build_fingerprint_db(const Eigen::MatrixXd& raw_features, std::vector<Vec3> positions,
                                   int angle_fft, int delay_fft, int polarization_blocks) {
  if (raw_features.rows() == 0) throw std::invalid_argument("fingerprint db needs at least one entry");
  if (static_cast<std::size_t>(raw_features.rows()) != positions.size())
    throw std::invalid_argument("feature and position counts differ");
  FingerprintDb db;
  db.angle_fft = angle_fft;
  db.delay_fft = delay_fft;
  db.polarization_blocks = polarization_blocks;
  db.positions = std::move(positions);
  db.mean = raw_features.colwise().mean();
  const Eigen::MatrixXd centred = raw_features.rowwise() - db.mean;
  db.scale = (centred.cwiseAbs2().colwise().sum() / static_cast<double>(raw_features.rows())).cwiseSqrt();
  for (Eigen::Index i = 0; i < db.scale.size(); ++i)
    if (!(db.scale(i) > 0.0)) db.scale(i) = 1.0;
  db.features = centred.array().rowwise() / db.scale.array();
  return db;
}

LocalizationResult localize_nn(const FingerprintDb& db, const Eigen::VectorXd& raw_query, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (db.size() == 0) throw std::invalid_argument("empty fingerprint db");
  const Eigen::RowVectorXd q = db.standardize(raw_query);
  const Eigen::VectorXd dist2 = (db.features.rowwise() - q).rowwise().squaredNorm();
  std::vector<std::size_t> idx(db.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double da = dist2(static_cast<Eigen::Index>(a));
                      const double dbv = dist2(static_cast<Eigen::Index>(b));
                      return da < dbv || (da == dbv && a < b);
                    });
  LocalizationResult res;
  res.neighbours.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk));
  for (auto i : res.neighbours) res.distances.push_back(std::sqrt(dist2(static_cast<Eigen::Index>(i))));
  if (res.distances.front() == 0.0) {
    res.estimate = db.positions[res.neighbours.front()];
    return res;
  }
  double wsum = 0.0;
  for (std::size_t i = 0; i < kk; ++i) {
    const double w = 1.0 / res.distances[i];
    res.estimate += w * db.positions[res.neighbours[i]];
    wsum += w;
  }
  res.estimate /= wsum;
  return res;
}

LocalizationResult localize_nn(const FingerprintDb& db, const CsiFrame& query, int k) {
  return localize_nn(db, frame_feature(query, db.polarization_blocks, db.angle_fft, db.delay_fft), k);
}

}  // namespace rfsim
