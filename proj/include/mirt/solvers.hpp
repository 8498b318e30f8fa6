#pragma once

// Penalized M-step solvers. All of them optimise a Monte-Carlo averaged
// complete-data objective: the design holds one row per latent draw and the
// log-likelihood sum is multiplied by `loglik_scale` (1/M in the EM), while
// the L1 penalties are unscaled. Coordinate updates soft-threshold, so
// reported zeros are exact zeros.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mirt/common.hpp"
#include "mirt/model.hpp"
#include "mirt/normal.hpp"

namespace mirt {

// Adaptive L1 weights w_k = lambda1 <gamma_k> + lambda0 (1 - <gamma_k>).
struct PenaltyWeights {
  Vector coef;
  double intercept = 0.0;
};

inline PenaltyWeights penalty_weights(const Vector& gamma_row, double lambda1, double lambda0) {
  PenaltyWeights w;
  w.coef = lambda1 * gamma_row + lambda0 * (Vector::Ones(gamma_row.size()) - gamma_row);
  w.intercept = lambda1;
  return w;
}

struct SolverOptions {
  double tol = 1e-7;
  int max_outer = 200;
  double loglik_scale = 1.0;   // 1/M for Monte Carlo designs
  double threshold_gap_floor = 1e-6;
  int cd_max_sweeps = 60;
};

struct ProbitFit {
  Vector beta;
  double intercept = 0.0;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  std::vector<double> objective_trace;
};

namespace detail {

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Coordinate descent for  min 1/2 p'Hp - b'p + sum_k w_k |p_k|.
inline void quad_l1_cd(const Matrix& h, const Vector& b, const Vector& w, Vector& p,
                       int max_sweeps, double tol) {
  const int n = static_cast<int>(p.size());
  Vector hp = h * p;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int k = 0; k < n; ++k) {
      const double hkk = std::max(h(k, k), 1e-12);
      const double resid = b(k) - (hp(k) - hkk * p(k));
      const double updated = soft_threshold(resid, w(k)) / hkk;
      const double delta = updated - p(k);
      if (delta != 0.0) {
        hp += h.col(k) * delta;
        p(k) = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < tol) break;
  }
}

}  // namespace detail

// Weighted-L1 probit regression with intercept:
//   maximize  scale * sum_r log Phi((2y_r - 1)(x_r' beta + d))
//             - sum_k w_k |beta_k| - w_d |d|.
// Proximal Newton: IRLS quadratic expansion, inner coordinate descent with
// soft-thresholding, backtracking on the exact penalized objective, so the
// objective never decreases across outer iterations.
inline ProbitFit fit_penalized_probit(const Matrix& x, const Vector& y, const PenaltyWeights& w,
                                      const Vector& init_beta, double init_intercept,
                                      const SolverOptions& opts = SolverOptions()) {
  const int rows = static_cast<int>(x.rows());
  const int k = static_cast<int>(x.cols());
  if (y.size() != rows) throw ConfigError("fit_penalized_probit: response length mismatch");
  if (w.coef.size() != k) throw ConfigError("fit_penalized_probit: weight length mismatch");
  for (int r = 0; r < rows; ++r)
    if (y(r) != 0.0 && y(r) != 1.0) throw DataError("fit_penalized_probit: non-binary response");

  const double scale = opts.loglik_scale;
  Vector p(k + 1);
  p.head(k) = init_beta;
  p(k) = init_intercept;

  auto objective = [&](const Vector& par) {
    double ll = 0.0;
    for (int r = 0; r < rows; ++r) {
      const double eta = x.row(r).dot(par.head(k)) + par(k);
      const double t = (2.0 * y(r) - 1.0) * eta;
      ll += log_normal_cdf(t);
    }
    double pen = w.intercept * std::abs(par(k));
    for (int c = 0; c < k; ++c) pen += w.coef(c) * std::abs(par(c));
    return scale * ll - pen;
  };

  ProbitFit fit;
  double obj = objective(p);
  fit.objective_trace.push_back(obj);

  Matrix h(k + 1, k + 1);
  Vector g(k + 1), b(k + 1), wfull(k + 1);
  wfull.head(k) = w.coef;
  wfull(k) = w.intercept;

  int iter = 0;
  for (; iter < opts.max_outer; ++iter) {
    h.setZero();
    g.setZero();
    Vector row(k + 1);
    for (int r = 0; r < rows; ++r) {
      const double s = 2.0 * y(r) - 1.0;
      const double eta = x.row(r).dot(p.head(k)) + p(k);
      const double t = s * eta;
      const double rho = normal_hazard(-t);  // phi(t) / Phi(t)
      const double u = s * rho;
      const double v = std::max(rho * (rho + t), 1e-10);
      row.head(k) = x.row(r).transpose();
      row(k) = 1.0;
      h.selfadjointView<Eigen::Lower>().rankUpdate(row, v);
      g += u * row;
    }
    h = h.selfadjointView<Eigen::Lower>();
    h *= scale;
    g *= scale;

    b = h * p + g;
    Vector p_new = p;
    detail::quad_l1_cd(h, b, wfull, p_new, opts.cd_max_sweeps, 0.1 * opts.tol);

    double step = 1.0;
    bool accepted = false;
    Vector p_try;
    for (int ls = 0; ls < 30; ++ls) {
      p_try = p + step * (p_new - p);
      // keep exact zeros from the full CD step
      if (step != 1.0)
        for (int c = 0; c <= k; ++c)
          if (p_new(c) == 0.0 && p(c) == 0.0) p_try(c) = 0.0;
      const double obj_try = objective(p_try);
      if (obj_try >= obj - 1e-12) {
        const double change = (p_try - p).cwiseAbs().maxCoeff();
        p = p_try;
        obj = std::max(obj, obj_try);
        fit.objective_trace.push_back(obj_try);
        accepted = true;
        if (change < opts.tol) {
          fit.converged = true;
        }
        break;
      }
      step *= 0.5;
    }
    if (!accepted || fit.converged) break;
  }
  fit.beta = p.head(k);
  fit.intercept = p(k);
  fit.iterations = iter + 1;
  fit.objective = obj;
  return fit;
}

struct OrderedProbitFit {
  Vector beta;
  Vector thresholds;  // strictly increasing
  bool converged = false;
  bool merged_levels = false;
  bool gap_floored = false;
  int iterations = 0;
  double objective = 0.0;
  std::vector<double> objective_trace;
};

namespace detail {

struct OrdinalDataPass {
  double loglik = 0.0;
  Vector grad_d;        // L
  Matrix hess_d;        // L x L
  double grad_eta_dot = 0.0;
  // per-row score / curvature in eta for the beta quadratic
  Vector u;  // rows
  Vector v;  // rows
};

// One pass over the data: log-likelihood, threshold derivatives, and the
// per-row eta score/curvature of the graded-response log-probability.
inline OrdinalDataPass ordinal_pass(const Matrix& x, const std::vector<int>& y, const Vector& beta,
                                    const Vector& d, bool want_rows) {
  const int rows = static_cast<int>(x.rows());
  const int l_thr = static_cast<int>(d.size());
  OrdinalDataPass out;
  out.grad_d = Vector::Zero(l_thr);
  out.hess_d = Matrix::Zero(l_thr, l_thr);
  if (want_rows) {
    out.u = Vector::Zero(rows);
    out.v = Vector::Zero(rows);
  }
  for (int r = 0; r < rows; ++r) {
    const int level = y[static_cast<size_t>(r)];
    const double eta = x.row(r).dot(beta);
    const double a = (level >= 1) ? eta + d(level - 1) : -kPosInf;
    const double b = (level <= l_thr - 1) ? eta + d(level) : kPosInf;
    const double pa = (level >= 1) ? normal_pdf(a) : 0.0;
    const double pb = (level <= l_thr - 1) ? normal_pdf(b) : 0.0;
    double prob;
    if (a == -kPosInf) {
      prob = normal_cdf(b);
    } else if (b == kPosInf) {
      prob = normal_sf(a);
    } else {
      prob = normal_interval_prob(a, b);
    }
    prob = std::max(prob, 1e-300);
    out.loglik += std::log(prob);

    const double ga = -pa / prob;  // d logp / d a
    const double gb = pb / prob;   // d logp / d b
    const double haa = (a == -kPosInf) ? 0.0 : a * pa / prob - (pa / prob) * (pa / prob);
    const double hbb = (b == kPosInf) ? 0.0 : -b * pb / prob - (pb / prob) * (pb / prob);
    const double hab = (a == -kPosInf || b == kPosInf) ? 0.0 : pa * pb / (prob * prob);

    if (level >= 1) {
      out.grad_d(level - 1) += ga;
      out.hess_d(level - 1, level - 1) += haa;
    }
    if (level <= l_thr - 1) {
      out.grad_d(level) += gb;
      out.hess_d(level, level) += hbb;
    }
    if (level >= 1 && level <= l_thr - 1) {
      out.hess_d(level - 1, level) += hab;
      out.hess_d(level, level - 1) += hab;
    }
    if (want_rows) {
      out.u(r) = ga + gb;
      const double curv = haa + hbb + 2.0 * hab;
      out.v(r) = std::max(-curv, 1e-10);
    }
  }
  return out;
}

}  // namespace detail

// Weighted-L1 ordered probit (graded response likelihood):
//   maximize scale * sum_r log[Phi(eta + d_{y}) - Phi(eta + d_{y-1})] - sum_k w_k |beta_k|.
// Thresholds are optimised in a log-gap parametrisation (d_0 free, positive
// increments), which enforces monotonicity smoothly; beta alternates through
// the same IRLS + coordinate-descent machinery as the binary solver.
inline OrderedProbitFit fit_penalized_ordered_probit(const Matrix& x, const std::vector<int>& y_in,
                                                     int n_thresholds, const PenaltyWeights& w,
                                                     const Vector& init_beta,
                                                     const Vector& init_thresholds,
                                                     const SolverOptions& opts = SolverOptions()) {
  const int rows = static_cast<int>(x.rows());
  const int k = static_cast<int>(x.cols());
  if (static_cast<int>(y_in.size()) != rows)
    throw ConfigError("ordered probit: response length mismatch");
  if (n_thresholds < 1) throw ConfigError("ordered probit: need at least one threshold");

  OrderedProbitFit fit;

  // Merge unobserved levels so every fitted threshold separates data.
  std::vector<long> counts(static_cast<size_t>(n_thresholds) + 1, 0);
  for (int v : y_in) {
    if (v < 0 || v > n_thresholds) throw DataError("ordered probit: level out of range");
    ++counts[static_cast<size_t>(v)];
  }
  std::vector<int> remap(static_cast<size_t>(n_thresholds) + 1, 0);
  int next = 0;
  for (int l = 0; l <= n_thresholds; ++l) {
    if (counts[static_cast<size_t>(l)] > 0) remap[static_cast<size_t>(l)] = next++;
    else {
      remap[static_cast<size_t>(l)] = -1;
      fit.merged_levels = true;
    }
  }
  const int eff_levels = next;
  if (eff_levels < 2) throw DataError("ordered probit: fewer than two observed levels");
  const int l_eff = eff_levels - 1;
  std::vector<int> y(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) y[static_cast<size_t>(r)] = remap[static_cast<size_t>(y_in[r])];

  const double scale = opts.loglik_scale;
  Vector beta = init_beta;

  // Threshold parametrisation: d_0 = t0, d_l = t0 + sum_{m<=l} exp(g_m).
  Vector d_eff(l_eff);
  {
    // start from observed cumulative proportions (exact MLE when x has no signal)
    double cum = 0.0;
    const double total = static_cast<double>(rows);
    int pos = 0;
    for (int l = 0; l <= n_thresholds && pos < l_eff; ++l) {
      if (counts[static_cast<size_t>(l)] == 0) continue;
      cum += static_cast<double>(counts[static_cast<size_t>(l)]);
      if (pos < l_eff) d_eff(pos++) = normal_inv_cdf(std::min(std::max(cum / total, 1e-12), 1.0 - 1e-12));
    }
    if (init_thresholds.size() == l_eff) d_eff = init_thresholds;  // caller knows better
    for (int l = 1; l < l_eff; ++l)
      d_eff(l) = std::max(d_eff(l), d_eff(l - 1) + opts.threshold_gap_floor);
  }
  const double log_gap_floor = std::log(opts.threshold_gap_floor);
  double t0 = d_eff(0);
  Vector gaps(std::max(0, l_eff - 1));
  for (int l = 1; l < l_eff; ++l) gaps(l - 1) = std::log(std::max(d_eff(l) - d_eff(l - 1), opts.threshold_gap_floor));

  auto thresholds_from = [&](double t0v, const Vector& g) {
    Vector d(l_eff);
    d(0) = t0v;
    for (int l = 1; l < l_eff; ++l) d(l) = d(l - 1) + std::exp(g(l - 1));
    return d;
  };
  auto objective = [&](const Vector& bvec, const Vector& dvec) {
    const auto pass = detail::ordinal_pass(x, y, bvec, dvec, false);
    double pen = 0.0;
    for (int c = 0; c < k; ++c) pen += w.coef(c) * std::abs(bvec(c));
    return scale * pass.loglik - pen;
  };

  double obj = objective(beta, d_eff);
  fit.objective_trace.push_back(obj);

  int iter = 0;
  for (; iter < opts.max_outer; ++iter) {
    double max_change = 0.0;

    // (1) beta through the IRLS quadratic
    {
      const auto pass = detail::ordinal_pass(x, y, beta, d_eff, true);
      Matrix h = Matrix::Zero(k, k);
      Vector g = Vector::Zero(k);
      for (int r = 0; r < rows; ++r) {
        h.selfadjointView<Eigen::Lower>().rankUpdate(x.row(r).transpose(), pass.v(r));
        g += pass.u(r) * x.row(r).transpose();
      }
      h = h.selfadjointView<Eigen::Lower>();
      h *= scale;
      g *= scale;
      Vector b = h * beta + g;
      Vector beta_new = beta;
      detail::quad_l1_cd(h, b, w.coef, beta_new, opts.cd_max_sweeps, 0.1 * opts.tol);

      double step = 1.0;
      for (int ls = 0; ls < 30; ++ls) {
        Vector beta_try = beta + step * (beta_new - beta);
        if (step != 1.0)
          for (int c = 0; c < k; ++c)
            if (beta_new(c) == 0.0 && beta(c) == 0.0) beta_try(c) = 0.0;
        const double obj_try = objective(beta_try, d_eff);
        if (obj_try >= obj - 1e-12) {
          max_change = std::max(max_change, (beta_try - beta).cwiseAbs().maxCoeff());
          beta = beta_try;
          obj = std::max(obj, obj_try);
          break;
        }
        step *= 0.5;
      }
    }

    // (2) thresholds: damped Newton in (t0, log-gaps)
    {
      const auto pass = detail::ordinal_pass(x, y, beta, d_eff, false);
      const int np = l_eff;  // t0 plus l_eff-1 gaps
      Matrix jac = Matrix::Zero(l_eff, np);
      for (int l = 0; l < l_eff; ++l) {
        jac(l, 0) = 1.0;
        for (int m = 1; m <= l && m < np; ++m) jac(l, m) = std::exp(gaps(m - 1));
      }
      Vector grad = jac.transpose() * pass.grad_d * scale;
      Matrix hess = jac.transpose() * pass.hess_d * jac * scale;
      for (int m = 1; m < np; ++m) {
        double acc = 0.0;
        for (int l = m; l < l_eff; ++l) acc += pass.grad_d(l);
        hess(m, m) += acc * std::exp(gaps(m - 1)) * scale;
      }

      double lm = 1e-8;
      for (int attempt = 0; attempt < 12; ++attempt) {
        Matrix a = -hess;
        a.diagonal().array() += lm;
        Vector step = a.ldlt().solve(grad);
        if (!step.allFinite()) {
          lm *= 10.0;
          continue;
        }
        double t0_try = t0 + step(0);
        Vector gaps_try = gaps;
        for (int m = 1; m < np; ++m)
          gaps_try(m - 1) = std::max(gaps(m - 1) + step(m), log_gap_floor);
        const Vector d_try = thresholds_from(t0_try, gaps_try);
        const double obj_try = objective(beta, d_try);
        if (obj_try >= obj - 1e-12) {
          max_change = std::max(max_change, (d_try - d_eff).cwiseAbs().maxCoeff());
          t0 = t0_try;
          gaps = gaps_try;
          d_eff = d_try;
          obj = std::max(obj, obj_try);
          break;
        }
        lm *= 10.0;
      }
    }

    fit.objective_trace.push_back(obj);
    if (max_change < opts.tol) {
      fit.converged = true;
      break;
    }
  }

  for (int m = 0; m + 1 < l_eff; ++m)
    if (gaps(m) <= log_gap_floor + 1e-12) fit.gap_floored = true;

  // Expand merged levels back to the requested threshold count.
  Vector d_full(n_thresholds);
  {
    int pos = 0;
    double last = d_eff(0);
    for (int l = 0; l < n_thresholds; ++l) {
      // threshold l separates level l from l+1; it is identified iff some
      // observed level lies on each side
      long below = 0, above = 0;
      for (int v = 0; v <= l; ++v) below += counts[static_cast<size_t>(v)];
      for (int v = l + 1; v <= n_thresholds; ++v) above += counts[static_cast<size_t>(v)];
      if (below > 0 && above > 0 && pos < l_eff) {
        last = d_eff(pos++);
        d_full(l) = last;
      } else {
        d_full(l) = (l > 0) ? d_full(l - 1) + opts.threshold_gap_floor : last;
        fit.merged_levels = true;
      }
    }
  }

  fit.beta = beta;
  fit.thresholds = d_full;
  fit.iterations = iter + 1;
  fit.objective = obj;
  return fit;
}

// Weighted-L1 least squares for a continuous item (no intercept; items are
// centered):  minimize scale * 1/2 sum_r (y_r - x_r' beta)^2 + sigma2 * sum_k w_k |beta_k|.
inline Vector fit_penalized_linear(const Matrix& x, const Vector& y, const Vector& w,
                                   double sigma2, const Vector& init_beta,
                                   const SolverOptions& opts = SolverOptions()) {
  const int k = static_cast<int>(x.cols());
  if (w.size() != k) throw ConfigError("fit_penalized_linear: weight length mismatch");
  if (!(sigma2 > 0.0)) throw ConfigError("fit_penalized_linear: sigma2 must be positive");
  const double scale = opts.loglik_scale;
  const Matrix gram = scale * (x.transpose() * x);
  const Vector xy = scale * (x.transpose() * y);
  Vector beta = init_beta;
  detail::quad_l1_cd(gram, xy, sigma2 * w, beta, 400, 1e-12);
  return beta;
}

// Residual-variance update under the inverse-gamma prior:
//   sigma2 = (scale * SSR + 2 eta2) / (n + 2 eta1 + 2),
// which is (SSR/M + 1) / (n + 3) at the default eta1 = eta2 = 1/2.
inline double update_sigma(const Matrix& x, const Vector& y, const Vector& beta, int n_obs,
                           double scale, double ig_shape = 0.5, double ig_rate = 0.5) {
  const double ssr = (y - x * beta).squaredNorm();
  return (scale * ssr + 2.0 * ig_rate) / (static_cast<double>(n_obs) + 2.0 * ig_shape + 2.0);
}

// Exact maximizer of the ordered-inclusion-probability program
//   max sum_jk [<gamma_jk> log c_k + (1 - <gamma_jk>) log(1 - c_k)] + (alpha - 1) log c_K
//   s.t. c non-increasing.
// Per-column Bernoulli means (the last column absorbs the alpha terms)
// projected onto the monotone cone by pool-adjacent-violators under the
// Bernoulli weights; this isotonic projection is the exact solution.
inline Vector optimize_ibp_weights(const Matrix& gamma_expect, double alpha) {
  if (alpha <= 0.0) throw ConfigError("optimize_ibp_weights: alpha must be positive");
  const int k = static_cast<int>(gamma_expect.cols());
  const double j_items = static_cast<double>(gamma_expect.rows());
  if (gamma_expect.minCoeff() < -1e-12 || gamma_expect.maxCoeff() > 1.0 + 1e-12)
    throw ConfigError("optimize_ibp_weights: gamma expectations outside [0,1]");

  std::vector<double> value(static_cast<size_t>(k));
  std::vector<double> weight(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) {
    double a = gamma_expect.col(c).sum();
    double b = j_items - a;
    if (c == k - 1) a += alpha - 1.0;
    const double tot = a + b;
    value[static_cast<size_t>(c)] = a / tot;
    weight[static_cast<size_t>(c)] = tot;
  }

  // PAVA for a non-increasing fit: merge any block whose mean falls below
  // the mean of the following block.
  std::vector<double> block_value, block_weight;
  std::vector<int> block_count;
  for (int c = 0; c < k; ++c) {
    block_value.push_back(value[static_cast<size_t>(c)]);
    block_weight.push_back(weight[static_cast<size_t>(c)]);
    block_count.push_back(1);
    while (block_value.size() >= 2 &&
           block_value[block_value.size() - 2] < block_value.back()) {
      const double wsum = block_weight[block_weight.size() - 2] + block_weight.back();
      const double merged = (block_value[block_value.size() - 2] * block_weight[block_weight.size() - 2] +
                             block_value.back() * block_weight.back()) /
                            wsum;
      block_value.pop_back();
      block_weight.pop_back();
      const int cnt = block_count.back();
      block_count.pop_back();
      block_value.back() = merged;
      block_weight.back() = wsum;
      block_count.back() += cnt;
    }
  }

  Vector out(k);
  int pos = 0;
  for (size_t bi = 0; bi < block_value.size(); ++bi) {
    const double v = std::min(std::max(block_value[bi], kIbpWeightFloor), 1.0 - kIbpWeightFloor);
    for (int rep = 0; rep < block_count[bi]; ++rep) out(pos++) = v;
  }
  return out;
}

struct PxRotation {
  Matrix second_moment;  // A
  Matrix chol_lower;     // A_L with A_L A_L' = A
};

// Parameter-expansion rotation: A is the pooled second moment of the latent
// draws and the loading update is B <- B A_L.
inline PxRotation px_rotation_from_moment(Matrix a) {
  const int k = static_cast<int>(a.rows());
  a = 0.5 * (a + a.transpose());
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-10 * std::max(1.0, a.trace() / k);
    for (int attempt = 0; attempt < 6 && llt.info() != Eigen::Success; ++attempt) {
      a.diagonal().array() += jitter * std::pow(10.0, attempt);
      llt.compute(a);
    }
    if (llt.info() != Eigen::Success)
      throw NumericError("px_rotation: second moment is singular");
  }
  return {a, Matrix(llt.matrixL())};
}

inline PxRotation px_rotation(const Matrix& theta_samples) {
  const int rows = static_cast<int>(theta_samples.rows());
  const int k = static_cast<int>(theta_samples.cols());
  if (rows < k) throw ConfigError("px_rotation: fewer draws than dimensions");
  Matrix a = (theta_samples.transpose() * theta_samples) / static_cast<double>(rows);
  return px_rotation_from_moment(std::move(a));
}

}  // namespace mirt
