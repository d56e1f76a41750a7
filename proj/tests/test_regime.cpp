#include <doctest.h>

#include <random>

#include "trajgov/regime.hpp"

using namespace trajgov;

namespace {

BandReport spatial(SpatialPattern p) {
  BandReport b;
  b.pattern = p;
  return b;
}

EnergyReport energy(double ratio) {
  EnergyReport e;
  e.ratio = ratio;
  return e;
}

FlipReport flip(FlipClass c) {
  FlipReport f;
  f.classification = c;
  return f;
}

Regime expected_regime(SpatialPattern s, double ratio, FlipClass f, bool scaffold) {
  if (!scaffold) return Regime::ScaffoldSelective;
  if (s == SpatialPattern::AuthorityBand && ratio >= 5.0 && f == FlipClass::Predictive) return Regime::AuthorityBand;
  if (ratio <= 0.90 || s == SpatialPattern::Inverted) return Regime::Inverted;
  if (s == SpatialPattern::LateSignal || f == FlipClass::LateSpike) return Regime::LateSignal;
  return Regime::Flat;
}

}  // namespace

TEST_CASE("regime examples") {
  auto v = classify_regime(spatial(SpatialPattern::AuthorityBand), energy(19.5), flip(FlipClass::Predictive), true);
  CHECK(v.regime == Regime::AuthorityBand);
  CHECK(v.governable);

  v = classify_regime(spatial(SpatialPattern::Flat), energy(1.04), flip(FlipClass::SilentFailure), true);
  CHECK(v.regime == Regime::Flat);
  CHECK_FALSE(v.governable);

  v = classify_regime(spatial(SpatialPattern::Inverted), energy(0.85), flip(FlipClass::SilentFailure), true);
  CHECK(v.regime == Regime::Inverted);

  v = classify_regime(spatial(SpatialPattern::Flat), energy(1.0), flip(FlipClass::SilentFailure), false);
  CHECK(v.regime == Regime::ScaffoldSelective);
  CHECK_FALSE(v.scaffold_valid);

  // Late band with near-unit energy resolves to late_signal.
  v = classify_regime(spatial(SpatialPattern::LateSignal), energy(1.04), flip(FlipClass::LateSpike), true);
  CHECK(v.regime == Regime::LateSignal);

  // Authority geometry without a predictive flip does not govern.
  v = classify_regime(spatial(SpatialPattern::AuthorityBand), energy(19.5), flip(FlipClass::LateSpike), true);
  CHECK(v.regime == Regime::LateSignal);
  CHECK_FALSE(v.governable);
}

TEST_CASE("verdict embeds the config and evidence") {
  RegimeConfig cfg{7.5, 0.8};
  const auto v = classify_regime(spatial(SpatialPattern::AuthorityBand), energy(6.0), flip(FlipClass::Predictive), true, cfg);
  CHECK(v.regime == Regime::Flat);
  CHECK(v.config.governable_ratio == 7.5);
  CHECK(v.config.inverted_ratio == 0.8);
  CHECK(v.energy.ratio == 6.0);
  CHECK(v.spatial.pattern == SpatialPattern::AuthorityBand);
}

TEST_CASE("randomized evidence follows the fixed decision order") {
  std::mt19937_64 rng(17);
  const SpatialPattern patterns[] = {SpatialPattern::AuthorityBand, SpatialPattern::LateSignal, SpatialPattern::Inverted,
                                     SpatialPattern::Flat};
  const FlipClass flips[] = {FlipClass::Predictive, FlipClass::LateSpike, FlipClass::SilentFailure};
  std::lognormal_distribution<double> ratio(0.0, 1.5);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto s = patterns[rng() % 4];
    const auto f = flips[rng() % 3];
    const double r = trial % 10 == 0 ? (trial % 20 == 0 ? 5.0 : 0.90) : ratio(rng);
    const bool scaffold = rng() % 5 != 0;
    const auto v = classify_regime(spatial(s), energy(r), flip(f), scaffold);
    CHECK(v.regime == expected_regime(s, r, f, scaffold));
    CHECK(v.governable == (v.regime == Regime::AuthorityBand && f == FlipClass::Predictive));
    CHECK((v.regime == Regime::ScaffoldSelective) == !scaffold);

    // Degrading the flip never keeps governability.
    const auto degraded = classify_regime(spatial(s), energy(r), flip(FlipClass::SilentFailure), scaffold);
    CHECK_FALSE(degraded.governable);
  }
}

TEST_CASE("regime names round trip") {
  for (auto r : {Regime::AuthorityBand, Regime::LateSignal, Regime::Inverted, Regime::Flat, Regime::ScaffoldSelective}) {
    CHECK(regime_from_string(to_string(r)) == r);
  }
  CHECK(to_string(Regime::ScaffoldSelective) == "scaffold_selective");
  CHECK(to_string(Regime::AuthorityBand) == "authority_band");
}
