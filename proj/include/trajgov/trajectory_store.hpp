#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace trajgov {

enum class Condition { Aligned, Misaligned, Hallucination };
enum class Decoding { Greedy, Sampled };
enum class DType : std::uint32_t { F32 = 0, F16 = 1 };

std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

/// Metadata for one recorded generation run. Field names on disk are the
/// snake_case member names.
struct RunManifest {
  std::string run_id;
  std::string model_id;
  std::string probe_id;
  Condition condition = Condition::Aligned;
  bool chat_template = false;
  Decoding decoding = Decoding::Greedy;
  std::optional<double> temperature;  // sampled decoding only
  std::string quantization;
  int prompt_token_count = 1;
  int generated_token_count = 0;
  int layer_state_count = 0;  // embedding output included
  int hidden_dim = 0;
  DType dtype = DType::F32;
  std::string tensor_path = "states.htrj";
  std::vector<std::int64_t> generated_token_ids;
  std::string generated_text;
  std::optional<int> commit_annotation;

  // Optional extensions. token_pieces is the decoded text of each generated
  // token (concatenation == generated_text); it lets commit detection map
  // text offsets back to token positions without a tokenizer.
  std::optional<std::vector<std::string>> token_pieces;
  std::optional<std::uint32_t> tensor_crc32;
  // Keys not recognised above, preserved verbatim across load/save.
  nlohmann::json extra = nlohmann::json::object();

  int token_count() const noexcept { return 1 + generated_token_count; }

  /// Throws Error(FormatError) when the manifest's own invariants fail.
  void validate() const;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// Hidden states of one run, indexed [t][layer][d]. Position t = 0 is the
/// final prompt token; t = 1 + i is generated token i. Values are held in
/// f32 regardless of storage dtype.
class HiddenTrajectory {
 public:
  HiddenTrajectory() = default;
  HiddenTrajectory(RunManifest manifest, std::vector<float> states);

  const RunManifest& manifest() const noexcept { return manifest_; }
  RunManifest& manifest() noexcept { return manifest_; }

  int tokens() const noexcept { return manifest_.token_count(); }
  int layers() const noexcept { return manifest_.layer_state_count; }
  int dim() const noexcept { return manifest_.hidden_dim; }

  std::span<const float> state(int t, int layer) const {
    const auto d = static_cast<std::size_t>(dim());
    return {states_.data() + (static_cast<std::size_t>(t) * layers() + layer) * d, d};
  }
  std::span<const float> values() const noexcept { return states_; }
  std::vector<float>& mutable_values() noexcept { return states_; }

 private:
  RunManifest manifest_;
  std::vector<float> states_;
};

/// Size of the fixed tensor-file header in bytes.
inline constexpr std::size_t kTensorHeaderBytes = 24;

/// Serialises the tensor file (header + payload) for a trajectory.
std::vector<std::uint8_t> encode_tensor(const HiddenTrajectory& traj);

HiddenTrajectory load_run(const std::filesystem::path& manifest_path);

/// Writes manifest.json and the tensor file into `dir` (created if needed).
/// Returns the manifest path.
std::filesystem::path save_run(const HiddenTrajectory& traj, const std::filesystem::path& dir);

struct RunSetEntry {
  std::filesystem::path manifest;  // absolute or relative to the run-set file
  std::optional<std::string> pair;
};

struct RunSet {
  std::vector<RunSetEntry> runs;
  std::optional<std::filesystem::path> probe_dir;
};

RunSet load_runset(const std::filesystem::path& path);
void save_runset(const RunSet& set, const std::filesystem::path& path);

}  // namespace trajgov
