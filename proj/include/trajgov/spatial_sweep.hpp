#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trajgov/interval.hpp"
#include "trajgov/kinematics.hpp"

namespace trajgov {

/// Per-layer ratio of token-mean tension, misaligned over aligned, over
/// generated tokens. Index c holds layer c + 1.
struct LayerProfile {
  std::vector<double> ratios;
  std::vector<unsigned char> valid;
  int layer_count = 0;  // L_s

  int first_layer() const noexcept { return 1; }
  int last_layer() const noexcept { return static_cast<int>(ratios.size()); }
  double at(int layer) const { return ratios[static_cast<std::size_t>(layer - 1)]; }
  bool is_valid(int layer) const { return valid[static_cast<std::size_t>(layer - 1)] != 0; }
  std::size_t valid_layers() const;
};

LayerProfile layer_profile(const TensionField& aligned, const TensionField& misaligned);

struct SweepConfig {
  double band_threshold = 5.0;
  double authority_peak = 10.0;
  double inversion_threshold = 0.75;
  double weak_threshold = 2.0;
  double late_start = 0.55;
  int min_zone = 3;
};

enum class SpatialPattern { AuthorityBand, LateSignal, Inverted, Flat };

std::string to_string(SpatialPattern p);
SpatialPattern spatial_pattern_from_string(const std::string& s);

struct BandReport {
  SpatialPattern pattern = SpatialPattern::Flat;
  std::optional<Interval> band;            // run >= band_threshold holding the peak
  double peak_ratio = 0.0;
  int peak_layer = 0;
  std::optional<Interval> inversion_zone;  // run <= inversion_threshold, length >= min_zone
  double min_ratio = 0.0;
  int min_layer = 0;
  double relative_start = 0.0;             // start of band (else weak band) / L_s
  std::optional<Interval> weak_band;       // run >= weak_threshold holding the peak
  SweepConfig config;
};

/// Maximal runs of valid layers satisfying pred, in layer order.
std::vector<Interval> maximal_runs(const LayerProfile& profile, const std::function<bool(double)>& pred);

BandReport classify_spatial(const LayerProfile& profile, const SweepConfig& cfg = {});

}  // namespace trajgov
