#pragma once

#include <optional>
#include <string>

#include "trajgov/interval.hpp"
#include "trajgov/kinematics.hpp"
#include "trajgov/spatial_sweep.hpp"

namespace trajgov {

inline constexpr const char* kGeometricDisclaimer =
    "Tension sums describe the geometry of hidden-state paths only. They are not a measure of "
    "semantic effort, of whether the model registers correctness, or of any causal mechanism.";

struct EnergyReport {
  double sum_aligned = 0.0;
  double sum_misaligned = 0.0;
  double ratio = 0.0;
  std::optional<Interval> band;
  std::optional<double> band_sum_aligned;
  std::optional<double> band_sum_misaligned;
  std::optional<double> band_ratio;
  bool decoupling_flag = false;
  std::size_t cells = 0;  // per run, generated tokens x interior layers
  std::size_t invalid_aligned = 0;
  std::size_t invalid_misaligned = 0;
  bool low_confidence = false;
};

struct EnergyParams {
  double zero_energy = 1e-12;        // sum_aligned below this is treated as zero
  double low_confidence_fraction = 0.10;
};

/// Sums of valid q over generated tokens (prompt anchor excluded), full stack
/// and optionally restricted to a layer band.
EnergyReport energy_ratio(const TensionField& aligned, const TensionField& misaligned,
                          std::optional<Interval> band, const EnergyParams& params = {});

/// Largest |r_on - r_off| across layers. Layers valid in only one profile
/// count as an infinite difference.
double profile_max_delta(const LayerProfile& on, const LayerProfile& off);

/// True when the per-layer profile is unchanged (within tol) while the
/// cumulative ratios sit on opposite sides of 1.
bool classify_decoupling(const LayerProfile& profile_on, const LayerProfile& profile_off, double tss_on,
                         double tss_off, double tol = 1e-3);

}  // namespace trajgov
