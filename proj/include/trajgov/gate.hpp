#pragma once

#include <optional>
#include <set>
#include <string>

#include "trajgov/flip_analyzer.hpp"
#include "trajgov/regime.hpp"

namespace trajgov {

enum class GateAction { Block, Allow, Abstain, ForensicFlag };

std::string to_string(GateAction a);

struct GateVerdict {
  GateAction action = GateAction::Allow;
  std::optional<int> trigger_token;
  Regime regime = Regime::Flat;
  double threshold = kDefaultTheta;
  std::string reason;
};

/// Regime-aware monitoring decision over one recorded token series.
///
/// authority_band blocks at the first k-persistent excursion >= theta*baseline;
/// inverted blocks at the first k-persistent depression <= baseline/theta;
/// late_signal never blocks and flags the first excursion for forensics;
/// flat and scaffold_selective abstain.
GateVerdict evaluate_gate(const TokenSeries& series, Regime regime, double theta, int k);

/// Regime-agnostic rule: block when the summed series exceeds the threshold.
bool naive_gate(const TokenSeries& series, double threshold = kDefaultTheta);

/// Generated positions covered by some k-window lying entirely at or above
/// theta*baseline (high = true) or at or below baseline/theta (high = false).
std::set<int> persistent_cover(const TokenSeries& series, double theta, int k, bool high);

}  // namespace trajgov
