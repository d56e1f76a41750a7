#pragma once

// Brute-force reference implementations used only by tests. Each one is
// written independently of the library code it checks.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "trajgov/interval.hpp"
#include "trajgov/trajectory_store.hpp"

namespace oracle {

using trajgov::Condition;
using trajgov::HiddenTrajectory;
using trajgov::Interval;
using trajgov::RunManifest;

inline RunManifest manifest(const std::string& run_id, int generated, int layers, int dim,
                            Condition condition = Condition::Aligned) {
  RunManifest m;
  m.run_id = run_id;
  m.model_id = "test-model";
  m.probe_id = "test-probe";
  m.condition = condition;
  m.quantization = "none";
  m.prompt_token_count = 4;
  m.generated_token_count = generated;
  m.layer_state_count = layers;
  m.hidden_dim = dim;
  for (int i = 0; i < generated; ++i) m.generated_token_ids.push_back(100 + i);
  return m;
}

inline std::vector<float> random_states(std::size_t count, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<float> v(count);
  for (float& x : v) x = static_cast<float>(normal(rng));
  return v;
}

inline HiddenTrajectory random_trajectory(int tokens, int layers, int dim, std::uint64_t seed,
                                          Condition condition = Condition::Aligned) {
  auto m = manifest("rand" + std::to_string(seed), tokens - 1, layers, dim, condition);
  return HiddenTrajectory(m, random_states(static_cast<std::size_t>(tokens * layers * dim), seed));
}

struct Cell {
  double q = 0.0;
  double delta = 0.0;
  double kappa = 0.0;
  double tau = 0.0;
  bool valid = false;
};

// Naive triple loop: token, layer, then dimension, with explicit vectors.
inline Cell naive_cell(const HiddenTrajectory& tr, int t, int layer, double eps = 1e-8) {
  const int dim = tr.dim();
  const auto& all = tr.values();
  auto at = [&](int l, int d) {
    return static_cast<double>(all[(static_cast<std::size_t>(t) * tr.layers() + l) * dim + d]);
  };
  std::vector<double> v(dim), a(dim);
  for (int d = 0; d < dim; ++d) {
    v[d] = (at(layer + 1, d) - at(layer - 1, d)) / 2.0;
    a[d] = at(layer + 1, d) - 2.0 * at(layer, d) + at(layer - 1, d);
  }
  double vv = 0.0, aa = 0.0, av = 0.0;
  for (int d = 0; d < dim; ++d) {
    vv += v[d] * v[d];
    aa += a[d] * a[d];
    av += a[d] * v[d];
  }
  Cell c;
  c.delta = std::sqrt(vv);
  if (c.delta < eps) return c;
  c.valid = true;
  c.q = std::sqrt(aa) / c.delta;
  double perp = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double x = a[d] - (av / vv) * v[d];
    perp += x * x;
  }
  c.kappa = std::sqrt(perp) / vv;
  c.tau = c.delta * c.kappa;
  return c;
}

// Every window checked in full; no early exits shared with the detector.
inline std::optional<int> first_window(const std::vector<double>& values, double threshold, int k, bool high) {
  const int n = static_cast<int>(values.size());
  for (int i = 0; i + k <= n; ++i) {
    int hits = 0;
    for (int j = i; j < i + k; ++j) {
      if (high ? values[j] >= threshold : values[j] <= threshold) ++hits;
    }
    if (hits == k) return i;
  }
  return std::nullopt;
}

// All intervals whose members all hit, filtered to those not strictly inside
// another such interval. Indices are offset by first.
inline std::vector<Interval> maximal_runs(const std::vector<bool>& hit, int first = 1) {
  const int n = static_cast<int>(hit.size());
  auto all_hit = [&](int i, int j) {
    for (int x = i; x <= j; ++x) {
      if (!hit[x]) return false;
    }
    return true;
  };
  std::vector<Interval> out;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      if (!all_hit(i, j)) continue;
      const bool left_open = i > 0 && hit[i - 1];
      const bool right_open = j + 1 < n && hit[j + 1];
      if (!left_open && !right_open) out.push_back({i + first, j + first});
    }
  }
  return out;
}

// Last number of the form digits[.digits] scanning left to right.
inline std::optional<std::string> last_number(const std::string& text) {
  std::optional<std::string> last;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j + 1 < text.size() && text[j] == '.' && std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
      ++j;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    }
    last = text.substr(i, j - i);
    i = j;
  }
  return last;
}

// First position i such that every prefix ending at or after i yields the
// final answer.
inline std::optional<int> commit_by_prefix_scan(const std::vector<std::string>& pieces) {
  std::string full;
  for (const auto& p : pieces) full += p;
  const auto final_answer = last_number(full);
  if (!final_answer) return std::nullopt;
  const int n = static_cast<int>(pieces.size());
  for (int i = 0; i < n; ++i) {
    bool stable = true;
    for (int j = i; j < n && stable; ++j) {
      std::string prefix;
      for (int x = 0; x <= j; ++x) prefix += pieces[x];
      stable = last_number(prefix) == final_answer;
    }
    if (stable) return i;
  }
  return std::nullopt;
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
inline std::vector<double> random_orthogonal(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> q(static_cast<std::size_t>(dim * dim));
  for (int r = 0; r < dim; ++r) {
    for (;;) {
      for (int c = 0; c < dim; ++c) q[r * dim + c] = normal(rng);
      for (int p = 0; p < r; ++p) {
        double dot = 0.0;
        for (int c = 0; c < dim; ++c) dot += q[r * dim + c] * q[p * dim + c];
        for (int c = 0; c < dim; ++c) q[r * dim + c] -= dot * q[p * dim + c];
      }
      double n = 0.0;
      for (int c = 0; c < dim; ++c) n += q[r * dim + c] * q[r * dim + c];
      n = std::sqrt(n);
      if (n < 1e-6) continue;
      for (int c = 0; c < dim; ++c) q[r * dim + c] /= n;
      break;
    }
  }
  return q;
}

}  // namespace oracle
