#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "trajgov/energy.hpp"
#include "trajgov/error.hpp"

using namespace trajgov;

namespace {

TensionField field(int tokens, int interior, double fill = 0.0) {
  TensionField f;
  f.q = Grid<double>(static_cast<std::size_t>(tokens), static_cast<std::size_t>(interior), fill);
  f.valid = Grid<unsigned char>(static_cast<std::size_t>(tokens), static_cast<std::size_t>(interior), 1);
  return f;
}

TensionField random_field(int tokens, int interior, std::uint64_t seed, double invalid_rate) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> value(0.0, 1.0);
  std::bernoulli_distribution drop(invalid_rate);
  TensionField f = field(tokens, interior);
  for (std::size_t i = 0; i < f.q.data().size(); ++i) {
    if (drop(rng)) {
      f.valid.data()[i] = 0;
    } else {
      f.q.data()[i] = value(rng);
    }
  }
  return f;
}

// Spreads total evenly over the generated cells of the given layers.
void fill_layers(TensionField& f, Interval layers, double total) {
  const double per = total / ((f.tokens() - 1) * layers.length());
  for (int t = 1; t < f.tokens(); ++t)
    for (int l = layers.first; l <= layers.last; ++l) f.q(static_cast<std::size_t>(t), static_cast<std::size_t>(l - 1)) = per;
}

LayerProfile profile_of(std::vector<double> r) {
  LayerProfile p;
  p.valid.assign(r.size(), 1);
  p.layer_count = static_cast<int>(r.size()) + 2;
  p.ratios = std::move(r);
  return p;
}

}  // namespace

TEST_CASE("full-stack ratio example") {
  auto a = field(4, 30);
  auto m = field(4, 30);
  fill_layers(a, {1, 30}, 82.6);
  fill_layers(m, {1, 30}, 1609.5);
  const auto r = energy_ratio(a, m, std::nullopt);
  CHECK(r.sum_aligned == doctest::Approx(82.6));
  CHECK(r.sum_misaligned == doctest::Approx(1609.5));
  CHECK(r.ratio == doctest::Approx(19.5).epsilon(0.05 / 19.5));
  CHECK(r.cells == 90);
  CHECK_FALSE(r.band.has_value());
  CHECK_FALSE(r.low_confidence);
}

TEST_CASE("band ratio example") {
  auto a = field(3, 30);
  auto m = field(3, 30);
  fill_layers(a, {13, 19}, 15.6);
  fill_layers(m, {13, 19}, 862.3);
  fill_layers(a, {1, 12}, 40.0);
  fill_layers(m, {1, 12}, 40.0);
  const auto r = energy_ratio(a, m, Interval{13, 19});
  REQUIRE(r.band_ratio);
  CHECK(*r.band_ratio == doctest::Approx(55.3).epsilon(0.05 / 55.3));
  CHECK(*r.band_sum_aligned == doctest::Approx(15.6));
  CHECK(*r.band_sum_misaligned == doctest::Approx(862.3));
}

TEST_CASE("inverted ratio example") {
  auto a = field(5, 40);
  auto m = field(5, 40);
  fill_layers(a, {1, 40}, 192.4);
  fill_layers(m, {1, 40}, 163.8);
  CHECK(energy_ratio(a, m, std::nullopt).ratio == doctest::Approx(0.85).epsilon(0.005 / 0.85));
}

TEST_CASE("a field against itself has ratio exactly one") {
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_field(2 + trial % 7, 3 + trial % 11, 50 + trial, 0.1);
    const auto r = energy_ratio(f, f, Interval{1, 3});
    CHECK(r.ratio == 1.0);
    CHECK(*r.band_ratio == 1.0);
  }
}

TEST_CASE("the prompt anchor is excluded from sums") {
  auto a = field(3, 2, 1.0);
  auto m = field(3, 2, 1.0);
  m.q(0, 0) = 1000.0;
  a.q(0, 1) = 1000.0;
  const auto r = energy_ratio(a, m, std::nullopt);
  CHECK(r.sum_aligned == 4.0);
  CHECK(r.ratio == 1.0);
}

TEST_CASE("sums are additive over any layer partition") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const int interior = 2 + static_cast<int>(rng() % 20);
    const auto a = random_field(2 + static_cast<int>(rng() % 8), interior, 300 + trial, 0.15);
    const auto m = random_field(a.tokens(), interior, 600 + trial, 0.15);
    double parts_a = 0.0, parts_m = 0.0;
    int start = 1;
    while (start <= interior) {
      const int end = start + static_cast<int>(rng() % static_cast<std::uint64_t>(interior - start + 1));
      double brute_a = 0.0;
      for (int t = 1; t < a.tokens(); ++t)
        for (int l = start; l <= end; ++l)
          if (a.is_valid(t, l)) brute_a += a.at(t, l);
      if (brute_a < 1e-12) {
        start = end + 1;
        continue;
      }
      const auto r = energy_ratio(a, m, Interval{start, end});
      CHECK(oracle::close_rel(*r.band_sum_aligned, brute_a, 1e-12));
      parts_a += *r.band_sum_aligned;
      parts_m += *r.band_sum_misaligned;
      start = end + 1;
    }
    // Skipped bands held zero aligned energy; add the misaligned side back.
    double skipped_m = 0.0;
    const auto full = energy_ratio(a, m, std::nullopt);
    double brute_m = 0.0;
    for (int t = 1; t < m.tokens(); ++t)
      for (int l = 1; l <= interior; ++l)
        if (m.is_valid(t, l)) brute_m += m.at(t, l);
    skipped_m = brute_m - parts_m;
    CHECK(oracle::close_rel(full.sum_aligned, parts_a, 1e-12));
    CHECK(oracle::close_rel(full.sum_misaligned, parts_m + skipped_m, 1e-12));
    CHECK(oracle::close_rel(full.sum_misaligned, brute_m, 1e-12));
  }
}

TEST_CASE("scaling the misaligned field scales the ratio") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_field(6, 9, 900 + trial, 0.05);
    const auto m = random_field(6, 9, 950 + trial, 0.05);
    const double s = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    auto ms = m;
    for (auto& v : ms.q.data()) v *= s;
    CHECK(oracle::close_rel(energy_ratio(a, ms, std::nullopt).ratio, s * energy_ratio(a, m, std::nullopt).ratio, 1e-12));
  }
}

TEST_CASE("zero aligned energy is reported, not divided") {
  const auto a = field(3, 4, 0.0);
  const auto m = field(3, 4, 1.0);
  try {
    (void)energy_ratio(a, m, std::nullopt);
    FAIL("expected ZeroAlignedEnergy");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroAlignedEnergy);
  }
  CHECK_THROWS_AS(energy_ratio(field(3, 4, 1.0), field(4, 4, 1.0), std::nullopt), Error);
  CHECK_THROWS_AS(energy_ratio(field(3, 4, 1.0), field(3, 4, 1.0), Interval{2, 5}), Error);
}

TEST_CASE("more than ten percent invalid cells lowers confidence") {
  auto a = field(11, 10, 1.0);
  auto m = field(11, 10, 1.0);
  for (std::size_t c = 0; c < 10; ++c) a.valid(1, c) = 0;  // exactly 10%
  auto r = energy_ratio(a, m, std::nullopt);
  CHECK(r.invalid_aligned == 10);
  CHECK_FALSE(r.low_confidence);
  m.valid(2, 0) = 0;
  m.valid(3, 0) = 0;
  for (std::size_t c = 0; c < 10; ++c) m.valid(4, c) = 0;
  r = energy_ratio(a, m, std::nullopt);
  CHECK(r.invalid_misaligned == 12);
  CHECK(r.low_confidence);
}

TEST_CASE("decoupling examples") {
  const auto p = profile_of({1.0, 1.2, 2.85, 1.1});
  CHECK(profile_max_delta(p, p) == 0.0);
  CHECK(classify_decoupling(p, p, 1.21, 0.93));
  CHECK_FALSE(classify_decoupling(p, p, 1.04, 1.04));
  CHECK_FALSE(classify_decoupling(p, p, 0.9, 0.8));
  auto q = p;
  q.ratios[2] += 0.5;
  CHECK(profile_max_delta(p, q) == doctest::Approx(0.5));
  CHECK_FALSE(classify_decoupling(p, q, 1.21, 0.93));
  q = p;
  q.ratios[1] += 0.0009;
  CHECK(classify_decoupling(p, q, 1.21, 0.93));
  q.valid[0] = 0;
  CHECK(std::isinf(profile_max_delta(p, q)));
  CHECK_THROWS_AS(profile_max_delta(p, profile_of({1.0})), Error);
}
