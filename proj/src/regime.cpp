#include "trajgov/regime.hpp"

#include "trajgov/error.hpp"

namespace trajgov {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::AuthorityBand: return "authority_band";
    case Regime::LateSignal: return "late_signal";
    case Regime::Inverted: return "inverted";
    case Regime::Flat: return "flat";
    case Regime::ScaffoldSelective: return "scaffold_selective";
  }
  return "flat";
}

Regime regime_from_string(const std::string& s) {
  for (auto r : {Regime::AuthorityBand, Regime::LateSignal, Regime::Inverted, Regime::Flat,
                 Regime::ScaffoldSelective}) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::ConfigError, "unknown regime '" + s + "'");
}

RegimeVerdict classify_regime(const BandReport& spatial, const EnergyReport& energy, const FlipReport& flip,
                              bool scaffold_valid, const RegimeConfig& cfg) {
  RegimeVerdict v{Regime::Flat, spatial, energy, flip, scaffold_valid, false, cfg};
  if (!scaffold_valid) {
    v.regime = Regime::ScaffoldSelective;
  } else if (spatial.pattern == SpatialPattern::AuthorityBand && energy.ratio >= cfg.governable_ratio &&
             flip.classification == FlipClass::Predictive) {
    v.regime = Regime::AuthorityBand;
  } else if (energy.ratio <= cfg.inverted_ratio || spatial.pattern == SpatialPattern::Inverted) {
    v.regime = Regime::Inverted;
  } else if (spatial.pattern == SpatialPattern::LateSignal || flip.classification == FlipClass::LateSpike) {
    v.regime = Regime::LateSignal;
  }
  v.governable = v.regime == Regime::AuthorityBand && flip.classification == FlipClass::Predictive;
  return v;
}

}  // namespace trajgov
