#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "trajgov/error.hpp"
#include "trajgov/kinematics.hpp"
#include "trajgov/synth.hpp"

using namespace trajgov;

namespace {

SynthProfile uniform(int generated, int layers, int dim, double q, std::uint64_t seed = 1) {
  SynthProfile p;
  p.name = "uniform";
  p.generated_tokens = generated;
  p.layer_states = layers;
  p.hidden_dim = dim;
  p.seed = seed;
  p.target_q = Grid<double>(static_cast<std::size_t>(generated + 1), static_cast<std::size_t>(layers - 2), q);
  p.meta.quantization = "none";
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ConfigError;
}

}  // namespace

TEST_CASE("zero target gives a straight line") {
  const auto tr = generate(uniform(3, 8, 5, 0.0));
  const auto f = tension_field(tr);
  for (int t = 0; t < f.tokens(); ++t) {
    for (int l = 1; l <= 6; ++l) {
      CHECK(f.is_valid(t, l));
      CHECK(f.at(t, l) < 1e-6);
    }
  }
}

TEST_CASE("uniform target of 2.0 is realized at every cell") {
  const auto tr = generate(uniform(3, 16, 8, 2.0));
  CHECK(tr.tokens() == 4);
  CHECK(tr.layers() == 16);
  CHECK(tr.dim() == 8);
  for (int t = 0; t < 4; ++t) {
    for (int l = 1; l <= 14; ++l) {
      const auto ref = oracle::naive_cell(tr, t, l);
      REQUIRE(ref.valid);
      CHECK(ref.q == doctest::Approx(2.0).epsilon(0.02));
    }
  }
}

TEST_CASE("identical profile and seed give bit-identical tensors") {
  const auto p = uniform(5, 9, 6, 0.7, 42);
  CHECK(encode_tensor(generate(p)) == encode_tensor(generate(p)));
  auto other = p;
  other.seed = 43;
  CHECK(encode_tensor(generate(p)) != encode_tensor(generate(other)));
}

TEST_CASE("random targets are self-verified within tolerance") {
  std::mt19937_64 rng(10);
  std::lognormal_distribution<double> q(-1.0, 1.2);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = uniform(1 + static_cast<int>(rng() % 6), 3 + static_cast<int>(rng() % 12), 3 + static_cast<int>(rng() % 10),
                     0.0, 100 + trial);
    for (auto& x : p.target_q.data()) x = q(rng);
    if (trial % 3 == 0) {
      // Half precision cannot resolve q far below 0.1 at these state norms.
      p.dtype = DType::F16;
      for (auto& x : p.target_q.data()) x = std::max(x, 0.1);
    }
    const auto tr = generate(p);
    CHECK(realization_error(tr, p.target_q) <= kRealizationTolerance);
  }
}

TEST_CASE("every fixture realizes its target") {
  std::set<std::string> ids;
  for (const auto& fr : fixture_suite()) {
    CAPTURE(fr.profile.name);
    const auto tr = generate(fr.profile);
    CHECK(realization_error(tr, fr.profile.target_q) <= kRealizationTolerance);
    CHECK(ids.insert(tr.manifest().run_id).second);
    CHECK(tr.manifest().extra.contains("provenance"));
    tr.manifest().validate();
  }
  CHECK(ids.size() > 60);
}

TEST_CASE("invalid profiles are rejected") {
  auto p = uniform(2, 5, 2, 1.0);
  CHECK(code_of([&] { (void)generate(p); }) == ErrorCode::PreconditionViolation);
  p = uniform(2, 5, 4, 1.0);
  p.target_q(1, 1) = -1.0;
  CHECK(code_of([&] { (void)generate(p); }) == ErrorCode::PreconditionViolation);
  p.target_q(1, 1) = std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { (void)generate(p); }) == ErrorCode::PreconditionViolation);
  p = uniform(2, 5, 4, 1.0);
  p.target_q = Grid<double>(3, 4, 1.0);
  CHECK(code_of([&] { (void)generate(p); }) == ErrorCode::PreconditionViolation);
}

TEST_CASE("targets beyond half precision are unrealizable") {
  // Tiny curvature on large f16 states is lost to rounding.
  auto p = uniform(2, 8, 4, 5e-5);
  p.dtype = DType::F16;
  CHECK(code_of([&] { (void)generate(p); }) == ErrorCode::UnrealizableTarget);
}

TEST_CASE("parametric shapes expand over band and window") {
  ParametricShape s;
  s.base = {0.1};
  s.band = Interval{2, 3};
  s.band_multiplier = 10.0;
  s.window = Interval{1, 2};
  const auto g = expand_shape(4, 6, s);
  REQUIRE(g.rows() == 5);
  REQUIRE(g.cols() == 4);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t c = 0; c < 4; ++c) {
      const bool hot = (t == 2 || t == 3) && (c == 1 || c == 2);
      CHECK(g(t, c) == doctest::Approx(hot ? 1.0 : 0.1));
    }
  }
  s.base = {1.0, 2.0};
  CHECK(code_of([&] { (void)expand_shape(4, 6, s); }) == ErrorCode::ConfigError);
}

TEST_CASE("profiles parse from JSON") {
  const nlohmann::json j = {{"name", "demo"},
                            {"generated_tokens", 3},
                            {"layer_states", 6},
                            {"hidden_dim", 5},
                            {"seed", 9},
                            {"condition", "misaligned"},
                            {"token_pieces", {" a", " 4", "8"}},
                            {"commit_annotation", 2},
                            {"shape", {{"base", 0.2}, {"band", "2:3"}, {"band_multiplier", 5.0}}}};
  const auto p = profile_from_json(j);
  CHECK(p.name == "demo");
  CHECK(p.meta.condition == Condition::Misaligned);
  CHECK(p.meta.generated_text == " a 48");
  CHECK(p.target_q(1, 1) == doctest::Approx(1.0));
  CHECK(p.target_q(0, 1) == doctest::Approx(0.2));
  const auto tr = generate(p);
  CHECK(tr.manifest().run_id == "demo");
  CHECK(tr.manifest().commit_annotation == 2);

  const nlohmann::json grid = {{"name", "g"}, {"generated_tokens", 1}, {"layer_states", 4}, {"target_q", {{1, 2}, {3, 4}}}};
  CHECK(profile_from_json(grid).target_q(1, 0) == 3.0);
  CHECK(code_of([] { (void)profile_from_json({{"name", "x"}, {"generated_tokens", 1}, {"layer_states", 4}}); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { (void)profile_from_json({{"name", "x"}}); }) == ErrorCode::ConfigError);
}

TEST_CASE("the written suite loads without validation errors") {
  testing_support::TempDir dir;
  const auto runset_path = write_fixture_suite(dir.path(), TRAJGOV_DATA_DIR);
  const RunSet set = load_runset(runset_path);
  REQUIRE(set.probe_dir);
  CHECK(std::filesystem::exists(*set.probe_dir / "oo1_arithmetic.json"));
  CHECK(set.runs.size() == fixture_suite().size());
  int paired = 0;
  for (const auto& e : set.runs) {
    const auto tr = load_run(e.manifest);
    CHECK(tr.manifest().extra.at("provenance") == "calibrated synthetic fixture; not a model recording");
    if (e.pair) ++paired;
  }
  CHECK(paired == 14);
}
