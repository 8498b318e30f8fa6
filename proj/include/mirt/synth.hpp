#pragma once

// Synthetic benchmark generators: loading patterns drawn from the IBP
// stick-breaking prior, the deterministic overlapping-pairs design, and
// mixed-type response simulation under the probit / graded-response /
// Gaussian observation models.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "mirt/common.hpp"
#include "mirt/model.hpp"
#include "mirt/normal.hpp"
#include "mirt/rng.hpp"

namespace mirt {

enum class SynthDesign { IbpDraw, OverlapPairs, Explicit };

struct SynthSpec {
  int n_obs = 250;
  int n_items = 350;
  SynthDesign design = SynthDesign::IbpDraw;
  // IbpDraw
  double alpha = 2.0;
  int keep_k = 5;
  // OverlapPairs
  int k_factors = 4;
  double pair_fraction = 0.5;
  // Explicit
  Matrix explicit_loading;
  std::vector<Vector> explicit_intercepts;
  // common
  std::vector<ItemKind> kinds;  // empty = all binary
  double magnitude = 1.0;
  double intercept_sd = 0.5;
  double resid_var = 1.0;
  std::uint64_t seed = 1;
};

struct IbpLoading {
  Matrix loading;  // j_items x keep_k
  Matrix pattern;  // 0/1 support indicators
};

// Sparsity pattern drawn column-by-column from the truncated stick-breaking
// representation (v_l ~ Beta(alpha,1), c_k = prod v_l, gamma ~ Bern(c_k));
// the keep_k columns with the largest support survive, ordered by support.
// Active entries are filled with `magnitude`.
inline IbpLoading draw_ibp_loading(int j_items, double alpha, int keep_k, double magnitude,
                                   Rng& rng) {
  if (keep_k < 1) throw ConfigError("draw_ibp_loading: keep_k must be >= 1");
  if (alpha <= 0.0) throw ConfigError("draw_ibp_loading: alpha must be positive");
  const int trunc = 5 * keep_k;  // stick-breaking tail beyond this is negligible

  for (int attempt = 0; attempt < 10; ++attempt) {
    Rng local = rng.substream(0x1BF, static_cast<std::uint64_t>(attempt));
    Matrix pattern = Matrix::Zero(j_items, trunc);
    double c = 1.0;
    std::vector<int> support(static_cast<size_t>(trunc), 0);
    for (int k = 0; k < trunc; ++k) {
      c *= std::pow(local.uniform(), 1.0 / alpha);  // Beta(alpha, 1) stick
      for (int j = 0; j < j_items; ++j) {
        if (local.bernoulli(c)) {
          pattern(j, k) = 1.0;
          ++support[static_cast<size_t>(k)];
        }
      }
    }
    std::vector<int> order(static_cast<size_t>(trunc));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return support[static_cast<size_t>(a)] > support[static_cast<size_t>(b)];
    });
    if (support[static_cast<size_t>(order[0])] == 0) continue;  // empty draw, retry

    IbpLoading out;
    out.pattern.resize(j_items, keep_k);
    for (int k = 0; k < keep_k; ++k) out.pattern.col(k) = pattern.col(order[static_cast<size_t>(k)]);
    out.loading = magnitude * out.pattern;
    return out;
  }
  throw NumericError("draw_ibp_loading: empty pattern after 10 attempts");
}

// Deterministic overlapping-pairs pattern: a (1 - pair_fraction) share of
// items loads on exactly one factor (balanced), the rest on a pair of
// factors cycling through all unordered pairs.
inline Matrix overlap_pairs_design(int j_items, int k, double pair_fraction, double magnitude) {
  if (k < 2) throw ConfigError("overlap_pairs_design: need at least two factors");
  if (pair_fraction < 0.0 || pair_fraction > 1.0)
    throw ConfigError("overlap_pairs_design: pair_fraction must be in [0,1]");
  const int n_pair = static_cast<int>(std::lround(pair_fraction * j_items));
  const int n_single = j_items - n_pair;

  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) pairs.emplace_back(a, b);

  Matrix loading = Matrix::Zero(j_items, k);
  for (int j = 0; j < n_single; ++j) loading(j, j % k) = magnitude;
  for (int j = 0; j < n_pair; ++j) {
    const auto& pr = pairs[static_cast<size_t>(j) % pairs.size()];
    loading(n_single + j, pr.first) = magnitude;
    loading(n_single + j, pr.second) = magnitude;
  }
  return loading;
}

// Simulates N respondents: theta ~ N(0, I_K), then each item by its kind's
// observation law.
inline ResponseMatrix simulate_responses(const Matrix& loading,
                                         const std::vector<Vector>& intercepts,
                                         const Vector& resid_var,
                                         const std::vector<ItemKind>& kinds, int n_obs, Rng& rng) {
  const int j_items = static_cast<int>(loading.rows());
  const int k = static_cast<int>(loading.cols());
  if (static_cast<int>(kinds.size()) != j_items || static_cast<int>(intercepts.size()) != j_items)
    throw ConfigError("simulate_responses: per-item metadata mismatch");

  ResponseMatrix data;
  data.items.resize(static_cast<size_t>(j_items));
  for (int j = 0; j < j_items; ++j)
    data.items[static_cast<size_t>(j)] = {"i" + std::to_string(j + 1), kinds[static_cast<size_t>(j)]};
  data.values.resize(n_obs, j_items);

  Vector theta(k);
  for (int i = 0; i < n_obs; ++i) {
    for (int c = 0; c < k; ++c) theta(c) = rng.normal();
    for (int j = 0; j < j_items; ++j) {
      const ItemKind& kind = kinds[static_cast<size_t>(j)];
      const double eta = loading.row(j).dot(theta);
      if (kind.type == ItemType::Binary) {
        const double z = eta + intercepts[static_cast<size_t>(j)](0) + rng.normal();
        data.values(i, j) = z > 0.0 ? 1.0 : 0.0;
      } else if (kind.type == ItemType::Ordinal) {
        const Vector& d = intercepts[static_cast<size_t>(j)];
        const double eps = rng.normal();
        int level = kind.levels - 1;
        for (int l = 0; l < d.size(); ++l) {
          if (eps <= eta + d(l)) {
            level = l;
            break;
          }
        }
        data.values(i, j) = level;
      } else {
        data.values(i, j) = eta + std::sqrt(resid_var(j)) * rng.normal();
      }
    }
  }
  return data;
}

struct SynthDataset {
  ResponseMatrix data;
  Matrix loading_true;
  std::vector<Vector> intercepts_true;
  Vector resid_var_true;
  Matrix pattern;
};

inline SynthDataset generate_synthetic(const SynthSpec& spec) {
  Rng rng(spec.seed);
  SynthDataset out;

  switch (spec.design) {
    case SynthDesign::IbpDraw: {
      const IbpLoading ibp = draw_ibp_loading(spec.n_items, spec.alpha, spec.keep_k,
                                              spec.magnitude, rng);
      out.loading_true = ibp.loading;
      out.pattern = ibp.pattern;
      break;
    }
    case SynthDesign::OverlapPairs: {
      out.loading_true = overlap_pairs_design(spec.n_items, spec.k_factors, spec.pair_fraction,
                                              spec.magnitude);
      out.pattern = (out.loading_true.array() != 0.0).cast<double>();
      break;
    }
    case SynthDesign::Explicit: {
      if (spec.explicit_loading.rows() != spec.n_items)
        throw ConfigError("generate_synthetic: explicit loading row count mismatch");
      out.loading_true = spec.explicit_loading;
      out.pattern = (out.loading_true.array() != 0.0).cast<double>();
      break;
    }
  }

  std::vector<ItemKind> kinds = spec.kinds;
  if (kinds.empty()) kinds.assign(static_cast<size_t>(spec.n_items), ItemKind::binary());
  if (static_cast<int>(kinds.size()) != spec.n_items)
    throw ConfigError("generate_synthetic: kinds length mismatch");

  out.resid_var_true = Vector::Constant(spec.n_items, spec.resid_var);
  out.intercepts_true.resize(static_cast<size_t>(spec.n_items));
  Rng d_rng = rng.substream(0xD);
  for (int j = 0; j < spec.n_items; ++j) {
    const ItemKind& kind = kinds[static_cast<size_t>(j)];
    if (spec.design == SynthDesign::Explicit && !spec.explicit_intercepts.empty()) {
      out.intercepts_true[static_cast<size_t>(j)] = spec.explicit_intercepts[static_cast<size_t>(j)];
    } else if (kind.type == ItemType::Ordinal) {
      Vector d(kind.levels - 1);
      for (int l = 0; l < d.size(); ++l) d(l) = spec.intercept_sd * d_rng.normal();
      std::sort(d.data(), d.data() + d.size());
      out.intercepts_true[static_cast<size_t>(j)] = d;
    } else if (kind.type == ItemType::Continuous) {
      out.intercepts_true[static_cast<size_t>(j)] = Vector::Zero(1);
    } else {
      out.intercepts_true[static_cast<size_t>(j)] = Vector::Constant(1, spec.intercept_sd * d_rng.normal());
    }
  }

  Rng y_rng = rng.substream(0xF);
  out.data = simulate_responses(out.loading_true, out.intercepts_true, out.resid_var_true, kinds,
                                spec.n_obs, y_rng);
  return out;
}

}  // namespace mirt
