#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajgov/interval.hpp"
#include "trajgov/trajectory_store.hpp"

namespace trajgov {

/// Target-tension recipe for one synthetic run.
struct SynthProfile {
  std::string name;
  int generated_tokens = 0;
  int layer_states = 0;
  int hidden_dim = 8;
  std::uint64_t seed = 0;
  DType dtype = DType::F32;
  // target_q(t, c): tensor position t (0 = prompt anchor), layer c + 1.
  Grid<double> target_q;
  // Identity and text fields copied into the manifest; shape fields are
  // filled in from the members above.
  RunManifest meta;

  void validate() const;
};

/// Compact alternative to a full target grid: per-layer base levels, with an
/// optional band of layers multiplied inside an optional generated-token
/// window.
struct ParametricShape {
  std::vector<double> base;  // one value (broadcast) or one per interior layer
  std::optional<Interval> band;
  double band_multiplier = 1.0;
  std::optional<Interval> window;  // generated positions
};

Grid<double> expand_shape(int generated_tokens, int layer_states, const ParametricShape& shape);

SynthProfile profile_from_json(const nlohmann::json& j);

inline constexpr double kRealizationTolerance = 0.02;
inline constexpr int kMaxCorrections = 8;

/// Builds hidden states whose layer-axis tension reproduces profile.target_q.
///
/// Each token's states walk in a random plane with constant step length; the
/// step turns by 2*atan(q/2) at every interior layer, which makes the second
/// difference orthogonal to the central velocity with |a|/|v| = q. The result
/// is re-measured and the target is rescaled cell by cell (at most
/// kMaxCorrections rounds) until every cell is within kRealizationTolerance.
/// Throws Error(UnrealizableTarget) otherwise.
HiddenTrajectory generate(const SynthProfile& profile);

/// Largest per-cell relative deviation of the measured field from target
/// (with a small absolute floor for near-zero targets).
double realization_error(const HiddenTrajectory& traj, const Grid<double>& target);

struct FixtureRun {
  SynthProfile profile;
  std::optional<std::string> pair;
};

/// The calibrated fixture families: phi3_off, phi3_on, qwen_on, qwen_off,
/// llama_off, deepseek_on, phi3_medium pairs and nine hallucination runs.
std::vector<FixtureRun> fixture_suite();

/// Single named family ("phi3_off", "qwen_off", "halluc", ...).
std::vector<FixtureRun> fixture_family(const std::string& family);

/// Generates every fixture under out_dir/<run_id>/, copies the probe catalog
/// from probe_source into out_dir/probes and writes out_dir/runset.json.
/// Returns the run-set path.
std::filesystem::path write_fixture_suite(const std::filesystem::path& out_dir,
                                          const std::filesystem::path& probe_source);

}  // namespace trajgov
