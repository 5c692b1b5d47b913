// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "rfsim/adp.hpp"
#include "rfsim/channel.hpp"

using namespace rfsim;
using C = std::complex<double>;

namespace {

Eigen::MatrixXcd random_csi(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXcd h(rows, cols);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = {n01(rng), n01(rng)};
  return h;
}

// Direct O(N^4) evaluation: forward DFT over rows, inverse DFT over columns, unitary scale.
Eigen::MatrixXcd naive_transform(const Eigen::MatrixXcd& h, int na, int nd) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(na, nd);
  for (int m = 0; m < na; ++m)
    for (int n = 0; n < nd; ++n) {
      C acc = 0.0;
      for (int e = 0; e < h.rows(); ++e)
        for (int k = 0; k < h.cols(); ++k)
          acc += h(e, k) * std::polar(1.0, -2 * kPi * e * m / na + 2 * kPi * double(k) * n / nd);
      out(m, n) = acc / std::sqrt(double(na) * nd);
    }
  return out;
}

// Plane wave on a uniform line of elements, on-grid in both axes.
Eigen::MatrixXcd on_grid_wave(int rows, int cols, int angle_bin, int delay_bin, C amplitude = 1.0) {
  Eigen::MatrixXcd h(rows, cols);
  for (int e = 0; e < rows; ++e)
    for (int k = 0; k < cols; ++k)
      h(e, k) = amplitude * std::polar(1.0, 2 * kPi * e * angle_bin / rows - 2 * kPi * double(k) * delay_bin / cols);
  return h;
}

}  // namespace

TEST_CASE("transform matches a direct evaluation") {
  const auto h = random_csi(6, 10, 1);
  const auto fast = angle_delay_transform(h, 8, 16);
  const auto slow = naive_transform(h, 8, 16);
  CHECK((fast - slow).norm() < 1e-10 * slow.norm());
  CHECK_THROWS_AS(angle_delay_transform(h, 4, 16), std::invalid_argument);
  CHECK_THROWS_AS(angle_delay_transform(h, 0, 16), std::invalid_argument);
}

TEST_CASE("energy is preserved") {
  for (auto [na, nd] : {std::pair{32, 64}, std::pair{64, 128}, std::pair{33, 70}}) {
    const auto h = random_csi(32, 64, static_cast<std::uint64_t>(na));
    const auto adp = compute_adp(h, na, nd);
    CHECK(std::abs(adp.energy() - h.squaredNorm()) <= 1e-6 * h.squaredNorm());
  }
}

TEST_CASE("single plane wave lands in its bin") {
  const auto adp = compute_adp(on_grid_wave(32, 64, 5, 12), 32, 64);
  CHECK(adp_peak(adp) == std::pair{5, 12});
  CHECK(adp.magnitude(5, 12) == doctest::Approx(std::sqrt(32.0 * 64.0)));
  CHECK(adp.magnitude.sum() - adp.magnitude(5, 12) < 1e-8);
}

TEST_CASE("synthesized path delay maps to its delay bin") {
  const OfdmGrid grid;
  const int nd = 64;
  const int bin = 9;
  PropagationPath p;
  p.delay = bin / (grid.subcarrier_spacing * nd);
  p.total_length = p.delay * kSpeedOfLight;
  p.transfer = Mat2c::Identity() * em::free_space_factor(p.total_length, grid.carrier_frequency);
  p.frequency_hz = grid.carrier_frequency;
  const auto tx = AntennaArray::upa(4, 8, 2.0, 0.5, ArrayPolarization::CrossPolarized, ArrayPlane::YZ, Vec3::Zero());
  const auto f = synthesize_csi({p}, tx, AntennaArray::single(p.total_length * Vec3::UnitX()), grid);
  for (const auto& b : compute_adp_blocks(f, 2, 32, nd)) {
    CHECK(adp_peak(b).second == bin);
    CHECK(adp_peak(b).first == 0);  // broadside
  }
}

TEST_CASE("zero input gives a zero profile") {
  const auto adp = compute_adp(Eigen::MatrixXcd::Zero(32, 64), 32, 64);
  CHECK(adp.energy() == 0.0);
  CHECK_THROWS(adp_similarity(adp, adp));
  const std::string pgm = adp_to_pgm(adp.magnitude);
  CHECK(std::all_of(pgm.end() - 32 * 64, pgm.end(), [](char c) { return c == 0; }));
}

TEST_CASE("two separated paths give two local maxima") {
  const Eigen::MatrixXcd h = on_grid_wave(32, 64, 5, 12) + on_grid_wave(32, 64, 20, 40, 0.8);
  const auto adp = compute_adp(h, 32, 64);
  const auto maxima = adp_local_maxima(adp, 0.1);
  REQUIRE(maxima.size() == 2);
  CHECK(maxima[0] == std::pair{5, 12});
  CHECK(maxima[1] == std::pair{20, 40});
  const double ratio_db = 20 * std::log10(adp.magnitude(20, 40) / adp.magnitude(5, 12));
  CHECK(std::abs(ratio_db - 20 * std::log10(0.8)) < 3.0);
}

TEST_CASE("similarity properties") {
  const auto a = compute_adp(random_csi(32, 64, 2), 32, 64);
  const auto b = compute_adp(random_csi(32, 64, 3), 32, 64);
  CHECK(adp_similarity(a, a) == doctest::Approx(1.0));
  auto scaled = a;
  scaled.magnitude *= 17.0;
  CHECK(adp_similarity(a, scaled) == doctest::Approx(1.0));
  CHECK(adp_similarity(a, b) == doctest::Approx(adp_similarity(b, a)));
  CHECK(adp_similarity(a, b) < 0.2);
  CHECK(adp_similarity(a, b) >= 0.0);
  CHECK_THROWS(adp_similarity(a, compute_adp(random_csi(32, 64, 2), 16, 64)));
}

TEST_CASE("delay shift rotates the delay axis") {
  const auto h = random_csi(32, 64, 4);
  const int s = 7;
  Eigen::MatrixXcd shifted = h;
  for (int k = 0; k < 64; ++k) shifted.col(k) *= std::polar(1.0, -2 * kPi * k * s / 64.0);
  const auto a = compute_adp(h, 32, 64);
  const auto b = compute_adp(shifted, 32, 64);
  for (int n = 0; n < 64; ++n) CHECK((b.magnitude.col((n + s) % 64) - a.magnitude.col(n)).norm() < 1e-9);
}

TEST_CASE("blocks and combination") {
  CsiFrame f;
  f.tx_elements = 64;
  f.h = random_csi(64, 64, 5);
  const auto blocks = compute_adp_blocks(f, 2, 32, 64);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[1].block == 1);
  CHECK((blocks[1].magnitude - compute_adp(f.h.bottomRows(32), 32, 64).magnitude).norm() < 1e-12);
  const auto comb = combine_blocks(blocks);
  CHECK(comb.energy() == doctest::Approx(blocks[0].energy() + blocks[1].energy()));
  CHECK_THROWS(compute_adp_blocks(f, 3, 32, 64));
}

TEST_CASE("image export") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 3);
  m(0, 0) = 1.0;
  m(1, 2) = 1e-3;  // -60 dB
  m(0, 1) = std::sqrt(1e-3);  // -30 dB
  const std::string pgm = adp_to_pgm(m);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(pgm.size() == header.size() + 6);
  CHECK(pgm.substr(0, header.size()) == header);
  const auto px = [&](int i) { return static_cast<unsigned char>(pgm[header.size() + i]); };
  CHECK(px(0) == 255);
  CHECK(px(1) == 128);
  CHECK(px(5) == 0);
}

TEST_CASE("raw tensor round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "rfsim_test_adp";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "t.adp").string();
  CsiFrame f;
  f.tx_elements = 64;
  f.h = random_csi(64, 64, 6);
  const auto blocks = compute_adp_blocks(f, 2, 32, 64);
  save_adp_raw(path, blocks);
  const auto back = load_adp_raw(path);
  REQUIRE(back.size() == 2);
  for (int b = 0; b < 2; ++b) CHECK(back[b].magnitude == blocks[b].magnitude);
  {
    std::ofstream os(path, std::ios::binary);
    os << "nonsense";
  }
  CHECK_THROWS(load_adp_raw(path));
  std::filesystem::remove_all(dir);
}

TEST_CASE("fingerprint features and nearest-neighbour lookup") {
  const int na = 8, nd = 16;
  std::vector<CsiFrame> frames;
  std::vector<Vec3> positions;
  for (int i = 0; i < 12; ++i) {
    CsiFrame f;
    f.tx_elements = 8;
    f.h = random_csi(8, 16, 100 + i);
    frames.push_back(f);
    positions.emplace_back(i, 2.0 * i, 0.5 * i);
  }
  Eigen::MatrixXd raw(12, na * nd);
  for (int i = 0; i < 12; ++i) raw.row(i) = frame_feature(frames[i], 1, na, nd).transpose();
  CHECK(raw.cols() == na * nd);
  CHECK(raw.maxCoeff() == 0.0);
  CHECK(raw.minCoeff() >= kFingerprintFloorDb);

  const auto db = build_fingerprint_db(raw, positions, na, nd, 1);
  CHECK(db.size() == 12);
  const Eigen::VectorXd col_mean = db.features.colwise().mean().transpose();
  CHECK(col_mean.cwiseAbs().maxCoeff() < 1e-9);

  for (int i = 0; i < 12; ++i) {
    const auto r = localize_nn(db, frames[i], 1);
    CHECK((r.estimate - positions[i]).norm() == 0.0);
    CHECK(r.neighbours.front() == static_cast<std::size_t>(i));
  }
  // k = size is a convex combination of all positions.
  CsiFrame q;
  q.tx_elements = 8;
  q.h = random_csi(8, 16, 999);
  const auto r = localize_nn(db, q, 100);
  CHECK(r.neighbours.size() == 12);
  CHECK(r.estimate.x() > 0.0);
  CHECK(r.estimate.x() < 11.0);
  CHECK(std::abs(r.estimate.y() - 2.0 * r.estimate.x()) < 1e-9);
  for (std::size_t i = 1; i < r.distances.size(); ++i) CHECK(r.distances[i - 1] <= r.distances[i]);
  CHECK_THROWS(localize_nn(db, q, 0));
}
