#pragma once

// Core model types shared by the samplers, solvers and EM driver:
// item taxonomy, response data, model parameters, prior configuration,
// and the spike-and-slab selection threshold rule.

#include <cmath>
#include <string>
#include <vector>

#include "mirt/common.hpp"

namespace mirt {

enum class ItemType { Binary, Ordinal, Continuous };

// Ordinal items carry `levels` = number of response categories (>= 2);
// observed values live in {0, ..., levels-1} and the item has levels-1
// ordered thresholds. A two-category ordinal item is deliberately distinct
// from a binary item: it goes through the graded-response path.
struct ItemKind {
  ItemType type = ItemType::Binary;
  int levels = 2;

  static ItemKind binary() { return {ItemType::Binary, 2}; }
  static ItemKind ordinal(int levels) {
    if (levels < 2) throw ConfigError("ordinal item needs at least 2 levels");
    return {ItemType::Ordinal, levels};
  }
  static ItemKind continuous() { return {ItemType::Continuous, 0}; }

  bool operator==(const ItemKind& o) const { return type == o.type && levels == o.levels; }
};

struct ItemSpec {
  std::string name;
  ItemKind kind;
};

struct ResponseMatrix {
  std::vector<ItemSpec> items;
  Matrix values;  // n_obs x n_items

  int n_obs() const { return static_cast<int>(values.rows()); }
  int n_items() const { return static_cast<int>(values.cols()); }
  const ItemKind& kind(int j) const { return items[static_cast<size_t>(j)].kind; }
};

// Loadings, intercepts/thresholds, ordered IBP inclusion weights, and
// residual variances for continuous items. Intercepts hold one entry for
// binary items, levels-1 ordered thresholds for ordinal items, and are
// unused (kept at zero) for continuous items, which are modelled centered.
struct ModelParams {
  Matrix loading;                  // n_items x k_star
  std::vector<Vector> intercepts;  // per item
  Vector ibp_weights;              // k_star, non-increasing in (0,1)
  Vector resid_var;                // n_items, used for continuous items only

  int n_items() const { return static_cast<int>(loading.rows()); }
  int k_star() const { return static_cast<int>(loading.cols()); }
  double intercept(int j) const { return intercepts[static_cast<size_t>(j)](0); }
};

inline constexpr double kIbpWeightFloor = 1e-8;  // keeps log c and log(1-c) finite

struct PriorConfig {
  double lambda1 = 0.5;
  std::vector<double> lambda0_ladder = {0.5, 1, 3, 6, 10, 20, 30, 40};
  double alpha = 2.0;   // IBP intensity
  int k_star = 10;      // truncation level
  int mc_base = 50;     // MC schedule M(t) = mc_base + mc_step * t, capped
  int mc_step = 10;
  int mc_cap = 400;
  double ig_shape = 0.5;  // inverse-gamma hyperparameters for residual variances
  double ig_rate = 0.5;

  int mc_samples(int iteration) const {
    const long m = static_cast<long>(mc_base) + static_cast<long>(mc_step) * iteration;
    return static_cast<int>(std::min<long>(m, mc_cap));
  }

  void check() const {
    if (lambda1 <= 0.0) throw ConfigError("lambda1 must be positive");
    if (alpha <= 0.0) throw ConfigError("IBP intensity alpha must be positive");
    if (k_star < 1) throw ConfigError("k_star must be at least 1");
    if (lambda0_ladder.empty()) throw ConfigError("lambda0 ladder is empty");
    double prev = -kPosInf;
    for (double l0 : lambda0_ladder) {
      if (l0 < lambda1) throw ConfigError("every lambda0 must be >= lambda1");
      if (l0 <= prev) throw ConfigError("lambda0 ladder must be strictly increasing");
      prev = l0;
    }
    if (mc_base < 1 || mc_cap < mc_base || mc_step < 0)
      throw ConfigError("invalid MC sample schedule");
    if (ig_shape <= 0.0 || ig_rate <= 0.0) throw ConfigError("invalid inverse-gamma hyperparameters");
  }
};

struct RungRecord {
  double lambda0 = 0.0;
  int iterations = 0;
  double max_abs_change = 0.0;
  double seconds = 0.0;
  bool converged = false;
  bool mcmc_estep = false;  // set when any observation used the MCMC fallback
  int effective_dim = 0;
};

struct FitResult {
  ModelParams params;
  Matrix gamma_expect;  // n_items x k_star, entries in [0,1]
  int effective_dim = 0;
  std::vector<RungRecord> trace;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// Laplace density psi(x | lambda) = lambda/2 * exp(-lambda |x|).
inline double laplace_density(double x, double lambda) {
  if (lambda <= 0.0) throw ConfigError("laplace_density: lambda must be positive");
  return 0.5 * lambda * std::exp(-lambda * std::abs(x));
}

inline double log_laplace_density(double x, double lambda) {
  if (lambda <= 0.0) throw ConfigError("laplace_density: lambda must be positive");
  return std::log(0.5 * lambda) - lambda * std::abs(x);
}

// Spike-and-slab selection threshold for column k. Entries strictly below
// the threshold are treated as inactive when counting dimensions.
inline double ssl_selection_threshold(double lambda0, double lambda1, double c) {
  if (lambda0 <= lambda1) throw ConfigError("selection threshold needs lambda0 > lambda1");
  const double cc = std::min(std::max(c, kIbpWeightFloor), 1.0 - kIbpWeightFloor);
  return std::log(lambda0 * (1.0 - cc) / (lambda1 * cc)) / (lambda0 - lambda1);
}

// Largest column index (1-based) holding at least one entry at or above its
// selection threshold; 0 when every column is sub-threshold.
inline int effective_dimension(const Matrix& loading, const Vector& ibp_weights,
                               const Vector& lambda0s, double lambda1) {
  const int k = static_cast<int>(loading.cols());
  if (ibp_weights.size() != k || lambda0s.size() != k)
    throw ConfigError("effective_dimension: column count mismatch");
  int dim = 0;
  for (int col = 0; col < k; ++col) {
    const double thresh = ssl_selection_threshold(lambda0s(col), lambda1, ibp_weights(col));
    const double colmax = loading.col(col).cwiseAbs().maxCoeff();
    if (colmax >= thresh) dim = col + 1;
  }
  return dim;
}

inline int effective_dimension(const Matrix& loading, const Vector& ibp_weights,
                               double lambda0, double lambda1) {
  return effective_dimension(loading, ibp_weights,
                             Vector::Constant(loading.cols(), lambda0), lambda1);
}

// Reports violated invariants; an empty list means the pair is consistent.
inline std::vector<std::string> validate(const ModelParams& params, const ResponseMatrix& data) {
  std::vector<std::string> issues;
  const int j_items = data.n_items();
  const int n = data.n_obs();

  if (params.n_items() != j_items)
    issues.push_back("loading rows (" + std::to_string(params.n_items()) +
                     ") != item count (" + std::to_string(j_items) + ")");
  if (static_cast<int>(params.intercepts.size()) != j_items)
    issues.push_back("intercept count != item count");
  if (params.ibp_weights.size() != params.loading.cols())
    issues.push_back("ibp weight count != loading columns");
  if (params.resid_var.size() != j_items)
    issues.push_back("residual variance count != item count");
  if (!params.loading.allFinite()) issues.push_back("non-finite loading entries");

  for (int k = 0; k + 1 < params.ibp_weights.size(); ++k) {
    if (params.ibp_weights(k) < params.ibp_weights(k + 1) - 1e-12) {
      issues.push_back("ibp weights increase at column " + std::to_string(k + 2));
      break;
    }
  }
  for (int k = 0; k < params.ibp_weights.size(); ++k) {
    const double c = params.ibp_weights(k);
    if (!(c > 0.0 && c < 1.0)) {
      issues.push_back("ibp weight outside (0,1) at column " + std::to_string(k + 1));
      break;
    }
  }

  for (int j = 0; j < j_items && j < static_cast<int>(params.intercepts.size()); ++j) {
    const ItemKind& kind = data.kind(j);
    const Vector& d = params.intercepts[static_cast<size_t>(j)];
    if (kind.type == ItemType::Ordinal) {
      if (d.size() != kind.levels - 1) {
        issues.push_back("item " + data.items[j].name + ": threshold count != levels-1");
        continue;
      }
      for (int l = 0; l + 1 < d.size(); ++l) {
        if (d(l) > d(l + 1)) {
          issues.push_back("item " + data.items[j].name + ": thresholds not increasing");
          break;
        }
      }
    } else if (d.size() != 1) {
      issues.push_back("item " + data.items[j].name + ": expected scalar intercept");
    }
    if (kind.type == ItemType::Continuous && params.resid_var.size() == j_items &&
        !(params.resid_var(j) > 0.0)) {
      issues.push_back("item " + data.items[j].name + ": residual variance not positive");
    }
  }

  for (int j = 0; j < j_items; ++j) {
    const ItemKind& kind = data.kind(j);
    for (int i = 0; i < n; ++i) {
      const double v = data.values(i, j);
      if (!std::isfinite(v)) {
        issues.push_back("item " + data.items[j].name + ": non-finite cell at row " +
                         std::to_string(i));
        break;
      }
      if (kind.type == ItemType::Binary && v != 0.0 && v != 1.0) {
        issues.push_back("item " + data.items[j].name + ": binary cell not in {0,1} at row " +
                         std::to_string(i));
        break;
      }
      if (kind.type == ItemType::Ordinal &&
          (v != std::floor(v) || v < 0.0 || v > kind.levels - 1)) {
        issues.push_back("item " + data.items[j].name + ": ordinal cell out of range at row " +
                         std::to_string(i));
        break;
      }
    }
  }
  return issues;
}

}  // namespace mirt
