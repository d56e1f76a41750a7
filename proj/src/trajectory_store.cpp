#include "trajgov/trajectory_store.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "trajgov/error.hpp"
#include "trajgov/half.hpp"

namespace trajgov {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::uint8_t, 6> kMagic{'H', 'T', 'R', 'J', '1', '\0'};
constexpr std::uint16_t kVersion = 1;

const std::array<const char*, 17> kKnownKeys{
    "run_id", "model_id", "probe_id", "condition", "chat_template", "decoding",
    "temperature", "quantization", "prompt_token_count", "generated_token_count",
    "layer_state_count", "hidden_dim", "dtype", "tensor_path", "generated_token_ids",
    "generated_text", "commit_annotation"};

bool known_key(const std::string& key) {
  for (const char* k : kKnownKeys) {
    if (key == k) return true;
  }
  return key == "token_pieces" || key == "tensor_crc32";
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint32_t crc_of(const std::vector<std::uint8_t>& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::FormatError, std::string("manifest missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("manifest field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string to_string(Condition c) {
  switch (c) {
    case Condition::Aligned: return "aligned";
    case Condition::Misaligned: return "misaligned";
    case Condition::Hallucination: return "hallucination";
  }
  return "aligned";
}

Condition condition_from_string(const std::string& s) {
  if (s == "aligned") return Condition::Aligned;
  if (s == "misaligned") return Condition::Misaligned;
  if (s == "hallucination") return Condition::Hallucination;
  throw Error(ErrorCode::FormatError, "unknown condition '" + s + "'");
}

void RunManifest::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::FormatError, why); };
  if (run_id.empty()) fail("run_id is empty");
  if (prompt_token_count < 1) fail("prompt_token_count must be >= 1");
  if (generated_token_count < 0) fail("generated_token_count must be >= 0");
  if (static_cast<std::size_t>(generated_token_count) != generated_token_ids.size()) {
    fail("generated_token_count != length(generated_token_ids)");
  }
  if (layer_state_count < 3) fail("layer_state_count must be >= 3");
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (decoding == Decoding::Sampled && !temperature) fail("sampled decoding requires temperature");
  if (token_pieces && token_pieces->size() != generated_token_ids.size()) {
    fail("token_pieces length != generated_token_count");
  }
  if (tensor_path.empty()) fail("tensor_path is empty");
}

json manifest_to_json(const RunManifest& m) {
  json j = m.extra.is_object() ? m.extra : json::object();
  j["run_id"] = m.run_id;
  j["model_id"] = m.model_id;
  j["probe_id"] = m.probe_id;
  j["condition"] = to_string(m.condition);
  j["chat_template"] = m.chat_template;
  j["decoding"] = m.decoding == Decoding::Greedy ? "greedy" : "sampled";
  if (m.temperature) j["temperature"] = *m.temperature;
  j["quantization"] = m.quantization;
  j["prompt_token_count"] = m.prompt_token_count;
  j["generated_token_count"] = m.generated_token_count;
  j["layer_state_count"] = m.layer_state_count;
  j["hidden_dim"] = m.hidden_dim;
  j["dtype"] = m.dtype == DType::F32 ? "f32" : "f16";
  j["tensor_path"] = m.tensor_path;
  j["generated_token_ids"] = m.generated_token_ids;
  j["generated_text"] = m.generated_text;
  if (m.commit_annotation) j["commit_annotation"] = *m.commit_annotation;
  if (m.token_pieces) j["token_pieces"] = *m.token_pieces;
  if (m.tensor_crc32) j["tensor_crc32"] = *m.tensor_crc32;
  return j;
}

RunManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::FormatError, "manifest is not a JSON object");
  RunManifest m;
  m.run_id = field<std::string>(j, "run_id");
  m.model_id = field<std::string>(j, "model_id");
  m.probe_id = field<std::string>(j, "probe_id");
  m.condition = condition_from_string(field<std::string>(j, "condition"));
  m.chat_template = field<bool>(j, "chat_template");
  const auto decoding = field<std::string>(j, "decoding");
  if (decoding == "greedy") {
    m.decoding = Decoding::Greedy;
  } else if (decoding == "sampled") {
    m.decoding = Decoding::Sampled;
  } else {
    throw Error(ErrorCode::FormatError, "unknown decoding '" + decoding + "'");
  }
  if (j.contains("temperature") && !j.at("temperature").is_null()) m.temperature = field<double>(j, "temperature");
  m.quantization = field<std::string>(j, "quantization");
  m.prompt_token_count = field<int>(j, "prompt_token_count");
  m.generated_token_count = field<int>(j, "generated_token_count");
  m.layer_state_count = field<int>(j, "layer_state_count");
  m.hidden_dim = field<int>(j, "hidden_dim");
  const auto dtype = field<std::string>(j, "dtype");
  if (dtype == "f32") {
    m.dtype = DType::F32;
  } else if (dtype == "f16") {
    m.dtype = DType::F16;
  } else {
    throw Error(ErrorCode::FormatError, "unknown dtype '" + dtype + "'");
  }
  m.tensor_path = field<std::string>(j, "tensor_path");
  m.generated_token_ids = field<std::vector<std::int64_t>>(j, "generated_token_ids");
  m.generated_text = field<std::string>(j, "generated_text");
  if (j.contains("commit_annotation") && !j.at("commit_annotation").is_null()) {
    m.commit_annotation = field<int>(j, "commit_annotation");
  }
  if (j.contains("token_pieces") && !j.at("token_pieces").is_null()) {
    m.token_pieces = field<std::vector<std::string>>(j, "token_pieces");
  }
  if (j.contains("tensor_crc32") && !j.at("tensor_crc32").is_null()) {
    m.tensor_crc32 = field<std::uint32_t>(j, "tensor_crc32");
  }
  for (const auto& [key, value] : j.items()) {
    if (!known_key(key)) m.extra[key] = value;
  }
  m.validate();
  return m;
}

HiddenTrajectory::HiddenTrajectory(RunManifest manifest, std::vector<float> states)
    : manifest_(std::move(manifest)), states_(std::move(states)) {
  manifest_.validate();
  const auto expected = static_cast<std::size_t>(manifest_.token_count()) *
                        static_cast<std::size_t>(manifest_.layer_state_count) *
                        static_cast<std::size_t>(manifest_.hidden_dim);
  if (states_.size() != expected) {
    throw Error(ErrorCode::ShapeMismatch, "state count " + std::to_string(states_.size()) +
                                              " != T*L_s*D = " + std::to_string(expected));
  }
  for (float v : states_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteData, "run " + manifest_.run_id);
  }
}

std::vector<std::uint8_t> encode_tensor(const HiddenTrajectory& traj) {
  const auto& m = traj.manifest();
  const auto values = traj.values();
  const std::size_t elem = m.dtype == DType::F32 ? 4 : 2;
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderBytes + values.size() * elem);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u16(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(m.token_count()));
  put_u32(out, static_cast<std::uint32_t>(m.layer_state_count));
  put_u32(out, static_cast<std::uint32_t>(m.hidden_dim));
  put_u32(out, static_cast<std::uint32_t>(m.dtype));
  for (float v : values) {
    if (m.dtype == DType::F32) {
      put_u32(out, std::bit_cast<std::uint32_t>(v));
    } else {
      put_u16(out, float_to_half(v));
    }
  }
  return out;
}

HiddenTrajectory load_run(const fs::path& manifest_path) {
  const auto manifest_bytes = read_file(manifest_path);
  json j;
  try {
    j = json::parse(manifest_bytes.begin(), manifest_bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, manifest_path.string() + ": " + e.what());
  }
  RunManifest m = manifest_from_json(j);

  const fs::path tensor_file = manifest_path.parent_path() / m.tensor_path;
  const auto bytes = read_file(tensor_file);
  if (bytes.size() < kTensorHeaderBytes) {
    throw Error(ErrorCode::FormatError, tensor_file.string() + ": shorter than header");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::FormatError, tensor_file.string() + ": bad magic");
  }
  if (get_u16(bytes.data() + 6) != kVersion) {
    throw Error(ErrorCode::FormatError, tensor_file.string() + ": unsupported version");
  }
  const std::uint32_t t = get_u32(bytes.data() + 8);
  const std::uint32_t l = get_u32(bytes.data() + 12);
  const std::uint32_t d = get_u32(bytes.data() + 16);
  const std::uint32_t dtype = get_u32(bytes.data() + 20);
  if (dtype > 1) throw Error(ErrorCode::FormatError, tensor_file.string() + ": unknown dtype code");
  if (static_cast<DType>(dtype) != m.dtype) {
    throw Error(ErrorCode::FormatError, tensor_file.string() + ": dtype disagrees with manifest");
  }
  if (t != static_cast<std::uint32_t>(m.token_count()) ||
      l != static_cast<std::uint32_t>(m.layer_state_count) ||
      d != static_cast<std::uint32_t>(m.hidden_dim)) {
    throw Error(ErrorCode::ShapeMismatch, tensor_file.string() + ": header dims (" + std::to_string(t) + "," +
                                              std::to_string(l) + "," + std::to_string(d) +
                                              ") disagree with manifest");
  }
  const std::uint64_t count = std::uint64_t{t} * l * d;
  const std::uint64_t elem = dtype == 0 ? 4 : 2;
  if (bytes.size() - kTensorHeaderBytes != count * elem) {
    throw Error(ErrorCode::ShapeMismatch, tensor_file.string() + ": payload is " +
                                              std::to_string(bytes.size() - kTensorHeaderBytes) +
                                              " bytes, expected " + std::to_string(count * elem));
  }
  if (m.tensor_crc32 && *m.tensor_crc32 != crc_of(bytes)) {
    throw Error(ErrorCode::FormatError, tensor_file.string() + ": checksum mismatch");
  }

  std::vector<float> states(count);
  const std::uint8_t* p = bytes.data() + kTensorHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i) {
    states[i] = dtype == 0 ? std::bit_cast<float>(get_u32(p + 4 * i)) : half_to_float(get_u16(p + 2 * i));
  }
  return HiddenTrajectory(std::move(m), std::move(states));
}

fs::path save_run(const HiddenTrajectory& traj, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  const auto bytes = encode_tensor(traj);
  RunManifest m = traj.manifest();
  m.tensor_crc32 = crc_of(bytes);
  write_file(dir / m.tensor_path, bytes.data(), bytes.size());

  const std::string text = manifest_to_json(m).dump(2);
  const fs::path manifest_path = dir / "manifest.json";
  write_file(manifest_path, text.data(), text.size());
  return manifest_path;
}

RunSet load_runset(const fs::path& path) {
  const auto bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("runs") || !j.at("runs").is_array()) {
    throw Error(ErrorCode::FormatError, path.string() + ": run-set needs a 'runs' array");
  }
  const fs::path base = path.parent_path();
  RunSet set;
  for (const auto& entry : j.at("runs")) {
    RunSetEntry e;
    try {
      fs::path mp = entry.at("manifest").get<std::string>();
      e.manifest = mp.is_absolute() ? mp : base / mp;
      if (entry.contains("pair") && !entry.at("pair").is_null()) e.pair = entry.at("pair").get<std::string>();
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::FormatError, path.string() + ": bad run entry: " + ex.what());
    }
    set.runs.push_back(std::move(e));
  }
  if (j.contains("probe_dir") && j.at("probe_dir").is_string()) {
    fs::path pd = j.at("probe_dir").get<std::string>();
    set.probe_dir = pd.is_absolute() ? pd : base / pd;
  }
  return set;
}

void save_runset(const RunSet& set, const fs::path& path) {
  json runs = json::array();
  for (const auto& e : set.runs) {
    json entry{{"manifest", e.manifest.generic_string()}};
    if (e.pair) entry["pair"] = *e.pair;
    runs.push_back(std::move(entry));
  }
  json j{{"runs", std::move(runs)}};
  if (set.probe_dir) j["probe_dir"] = set.probe_dir->generic_string();
  const std::string text = j.dump(2);
  write_file(path, text.data(), text.size());
}

}  // namespace trajgov
