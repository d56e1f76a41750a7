#pragma once

#include <string>

#include "trajgov/energy.hpp"
#include "trajgov/flip_analyzer.hpp"
#include "trajgov/spatial_sweep.hpp"

namespace trajgov {

inline constexpr const char* kIllustrativeThresholdDisclaimer =
    "Decision thresholds in this report, including the 5.0 ratio cutoff, are illustrative "
    "settings. None has been calibrated against repeated runs or validated statistically.";

enum class Regime { AuthorityBand, LateSignal, Inverted, Flat, ScaffoldSelective };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

struct RegimeConfig {
  double governable_ratio = 5.0;
  double inverted_ratio = 0.90;
};

struct RegimeVerdict {
  Regime regime = Regime::Flat;
  BandReport spatial;
  EnergyReport energy;
  FlipReport flip;
  bool scaffold_valid = true;
  bool governable = false;
  RegimeConfig config;
};

/// Rule order: scaffold refusal, authority band, inversion, late signal, flat.
RegimeVerdict classify_regime(const BandReport& spatial, const EnergyReport& energy, const FlipReport& flip,
                              bool scaffold_valid, const RegimeConfig& cfg = {});

}  // namespace trajgov
