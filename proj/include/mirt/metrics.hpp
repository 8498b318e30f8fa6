#pragma once

// Evaluation of fitted loadings against a known truth. Exploratory loadings
// are identified only up to column order and sign, so metrics first align
// the estimate: optimal assignment on absolute cosine similarity, signs
// chosen to make matched cosines non-negative.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mirt/common.hpp"
#include "mirt/model.hpp"
#include "mirt/rng.hpp"
#include "mirt/sun.hpp"
#include "mirt/threads.hpp"

namespace mirt {

struct Alignment {
  std::vector<int> matched_est;  // per true column: estimated column index or -1
  std::vector<double> sign;      // per true column: +1 / -1
  std::vector<int> unmatched_est;
};

namespace detail {

// Hungarian algorithm (potentials form), minimising cost on a square matrix.
inline std::vector<int> hungarian_min(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kPosInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = kPosInf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] > 0) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

// Injective map of true columns into estimated columns maximising total
// absolute cosine similarity. All-zero estimated columns never match.
inline Alignment align_loadings(const Matrix& b_est, const Matrix& b_true) {
  if (b_est.rows() != b_true.rows())
    throw ConfigError("align_loadings: row counts differ");
  const int k_true = static_cast<int>(b_true.cols());
  const int k_est = static_cast<int>(b_est.cols());
  const int n = std::max(k_true, k_est);

  Matrix sim = Matrix::Zero(n, n);  // rows: true columns, cols: estimated
  Matrix cosine = Matrix::Zero(k_true, k_est);
  for (int t = 0; t < k_true; ++t) {
    const double nt = b_true.col(t).norm();
    for (int e = 0; e < k_est; ++e) {
      const double ne = b_est.col(e).norm();
      if (nt > 0.0 && ne > 0.0) {
        cosine(t, e) = b_true.col(t).dot(b_est.col(e)) / (nt * ne);
        sim(t, e) = std::abs(cosine(t, e));
      }
    }
  }
  const std::vector<int> assign = detail::hungarian_min(-sim);

  Alignment out;
  out.matched_est.assign(static_cast<size_t>(k_true), -1);
  out.sign.assign(static_cast<size_t>(k_true), 1.0);
  std::vector<char> used(static_cast<size_t>(k_est), 0);
  for (int t = 0; t < k_true; ++t) {
    const int e = assign[static_cast<size_t>(t)];
    if (e < 0 || e >= k_est) continue;
    if (sim(t, e) <= 0.0) continue;  // zero or orthogonal column: leave unmatched
    out.matched_est[static_cast<size_t>(t)] = e;
    out.sign[static_cast<size_t>(t)] = cosine(t, e) >= 0.0 ? 1.0 : -1.0;
    used[static_cast<size_t>(e)] = 1;
  }
  for (int e = 0; e < k_est; ++e)
    if (!used[static_cast<size_t>(e)]) out.unmatched_est.push_back(e);
  return out;
}

// Mean squared entrywise difference after alignment, averaged over
// J x K_true entries; unmatched true columns are compared against zeros.
inline double loading_mse(const Matrix& b_est, const Matrix& b_true, const Alignment& alignment) {
  const int j_items = static_cast<int>(b_true.rows());
  const int k_true = static_cast<int>(b_true.cols());
  double sse = 0.0;
  for (int t = 0; t < k_true; ++t) {
    const int e = alignment.matched_est[static_cast<size_t>(t)];
    if (e < 0) {
      sse += b_true.col(t).squaredNorm();
    } else {
      sse += (alignment.sign[static_cast<size_t>(t)] * b_est.col(e) - b_true.col(t)).squaredNorm();
    }
  }
  return sse / (static_cast<double>(j_items) * k_true);
}

inline double intercept_mse(const std::vector<Vector>& d_est, const std::vector<Vector>& d_true) {
  if (d_est.size() != d_true.size()) throw ConfigError("intercept_mse: item counts differ");
  double sse = 0.0;
  long count = 0;
  for (size_t j = 0; j < d_true.size(); ++j) {
    if (d_est[j].size() != d_true[j].size())
      throw ConfigError("intercept_mse: threshold counts differ");
    sse += (d_est[j] - d_true[j]).squaredNorm();
    count += d_true[j].size();
  }
  return sse / std::max<long>(1, count);
}

struct FdrFnr {
  double fdr = 0.0;
  double fnr = 0.0;
};

// Support recovery rates at a threshold (0 for the EM, which produces exact
// zeros). Entries of unmatched estimated columns count as discoveries
// against a zero truth.
inline FdrFnr fdr_fnr(const Matrix& b_est, const Matrix& b_true, const Alignment& alignment,
                      double threshold = 0.0) {
  const int j_items = static_cast<int>(b_true.rows());
  const int k_true = static_cast<int>(b_true.cols());
  long discoveries = 0, false_disc = 0, truth_nonzero = 0, missed = 0;

  for (int t = 0; t < k_true; ++t) {
    const int e = alignment.matched_est[static_cast<size_t>(t)];
    for (int j = 0; j < j_items; ++j) {
      const bool truth_active = b_true(j, t) != 0.0;
      const bool est_active = e >= 0 && std::abs(b_est(j, e)) > threshold;
      truth_nonzero += truth_active;
      if (est_active) {
        ++discoveries;
        if (!truth_active) ++false_disc;
      } else if (truth_active) {
        ++missed;
      }
    }
  }
  for (int e : alignment.unmatched_est) {
    for (int j = 0; j < j_items; ++j) {
      if (std::abs(b_est(j, e)) > threshold) {
        ++discoveries;
        ++false_disc;
      }
    }
  }
  FdrFnr out;
  out.fdr = static_cast<double>(false_disc) / std::max<long>(1, discoveries);
  out.fnr = static_cast<double>(missed) / std::max<long>(1, truth_nonzero);
  return out;
}

// In-sample mean squared difference between observed cells and their
// posterior-predictive means (binary: Phi(eta) averaged over factor draws;
// ordinal: expected level; continuous: eta).
inline double reconstruction_mse(const ModelParams& params, const ResponseMatrix& data,
                                 int m_draws, const Rng& base_rng, int threads = 1,
                                 const SunSampleOptions& opts = SunSampleOptions()) {
  const int n = data.n_obs();
  const int j_items = data.n_items();
  const int k = params.k_star();
  const Vector prior_mean = Vector::Zero(k);
  const Matrix prior_cov = Matrix::Identity(k, k);

  std::vector<double> row_sse(static_cast<size_t>(n), 0.0);
  parallel_for(n, threads, [&](int i) {
    Rng rng = base_rng.substream(0x4ec0, static_cast<std::uint64_t>(i));
    const Vector y = data.values.row(i).transpose();
    const SunParams post = mixed_sun_params(params, data.items, y, prior_mean, prior_cov);
    const Matrix draws = sample_sun(post, m_draws, rng, nullptr, opts);
    double sse = 0.0;
    for (int j = 0; j < j_items; ++j) {
      const ItemKind& kind = data.kind(j);
      double pred = 0.0;
      for (int m = 0; m < m_draws; ++m) {
        const double eta = params.loading.row(j).dot(draws.row(m));
        if (kind.type == ItemType::Binary) {
          pred += normal_cdf(eta + params.intercept(j));
        } else if (kind.type == ItemType::Continuous) {
          pred += eta;
        } else {
          const Vector& d = params.intercepts[static_cast<size_t>(j)];
          double expected = 0.0;
          double prev_cdf = 0.0;
          for (int l = 0; l < kind.levels; ++l) {
            const double cdf = l < d.size() ? normal_cdf(eta + d(l)) : 1.0;
            expected += l * (cdf - prev_cdf);
            prev_cdf = cdf;
          }
          pred += expected;
        }
      }
      pred /= m_draws;
      const double diff = data.values(i, j) - pred;
      sse += diff * diff;
    }
    row_sse[static_cast<size_t>(i)] = sse;
  });
  double total = 0.0;
  for (double v : row_sse) total += v;
  return total / (static_cast<double>(n) * j_items);
}

}  // namespace mirt
