#pragma once

// Exact i.i.d. sampling from a zero-mean Gaussian truncated below
// componentwise, via minimax exponential tilting (Botev 2017), with a
// systematic-scan Gibbs fallback when the accept-reject step starves.
//
// Separation-of-variables form: with cov = L L' and z sequential standard
// normals, the region {x >= lower} becomes z_k >= lt_k(z_{1:k-1}). The
// proposal draws z_k from a mean-mu_k truncated normal; the log importance
// ratio is
//   psi(z; mu) = sum_k [ log Phibar(lt_k - mu_k) + mu_k^2/2 - mu_k z_k ],
// which is concave in z and convex in mu. The saddle point (x*, mu*) makes
// psi(x*; mu*) a tight upper bound, so accepting with probability
// exp(psi(z) - psi*) yields exact draws. Coordinates with lower = -inf are
// excluded from the truncation set and sampled as plain normals.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mirt/common.hpp"
#include "mirt/normal.hpp"
#include "mirt/rng.hpp"

namespace mirt {

struct TruncationSpec {
  Matrix cov;    // J x J symmetric positive semi-definite
  Vector lower;  // J lower bounds, entries may be -inf

  int dim() const { return static_cast<int>(lower.size()); }
};

struct TiltingSolution {
  std::vector<int> permutation;  // position -> original coordinate
  Matrix chol;                   // lower Cholesky factor of the permuted cov
  Vector lower_perm;             // permuted bounds; finite entries first
  int n_trunc = 0;               // count of finite bounds
  Vector tilt;                   // tilting parameters, permuted order
  Vector saddle;                 // saddle z, permuted order
  double log_psi_star = 0.0;
  double residual = 0.0;
  bool converged = false;
};

struct TmvnOptions {
  double accept_floor = 1e-6;       // empirical acceptance below this forces Gibbs
  long max_attempts = 200000;       // proposal budget before giving up on tilting
  int gibbs_burn_in = 100;
  int gibbs_thin = 1;
  double jitter_scale = 1e-8;       // times max diagonal, added when Cholesky fails
  int newton_max_iter = 150;
  double newton_tol = 1e-10;
};

struct TmvnReport {
  bool used_gibbs = false;
  bool tilting_converged = false;
  long attempts = 0;
  long accepts = 0;
  double acceptance_rate = 1.0;
  long bound_violations = 0;  // psi exceeding psi* beyond tolerance (should stay 0)
};

namespace detail {

inline Matrix cholesky_with_jitter(const Matrix& cov, double jitter_scale) {
  const double max_diag = std::max(cov.diagonal().maxCoeff(), 1.0);
  Matrix work = 0.5 * (cov + cov.transpose());
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::LLT<Matrix> llt(work);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    work.diagonal().array() += jitter_scale * max_diag * std::pow(10.0, attempt);
  }
  throw NumericError("tmvn: covariance not positive definite after jitter");
}

}  // namespace detail

// Solves the saddlepoint system of the minimax tilting bound. Coordinates are
// permuted so that truncated ones come first, ordered by increasing marginal
// acceptance probability.
inline TiltingSolution solve_tilting(const TruncationSpec& spec,
                                     const TmvnOptions& opts = TmvnOptions()) {
  const int j_dim = spec.dim();
  if (j_dim < 1) throw ConfigError("tmvn: dimension must be at least 1");
  if (spec.cov.rows() != j_dim || spec.cov.cols() != j_dim)
    throw ConfigError("tmvn: covariance and bound dimensions disagree");
  if ((spec.cov - spec.cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, spec.cov.cwiseAbs().maxCoeff()))
    throw ConfigError("tmvn: covariance is not symmetric");

  TiltingSolution sol;
  sol.permutation.resize(static_cast<size_t>(j_dim));
  std::iota(sol.permutation.begin(), sol.permutation.end(), 0);
  std::stable_sort(sol.permutation.begin(), sol.permutation.end(), [&](int a, int b) {
    const bool fa = std::isfinite(spec.lower(a));
    const bool fb = std::isfinite(spec.lower(b));
    if (fa != fb) return fa;  // truncated coordinates first
    if (!fa) return false;
    const double pa = normal_sf(spec.lower(a) / std::sqrt(std::max(spec.cov(a, a), 1e-300)));
    const double pb = normal_sf(spec.lower(b) / std::sqrt(std::max(spec.cov(b, b), 1e-300)));
    return pa < pb;
  });

  Matrix cov_p(j_dim, j_dim);
  sol.lower_perm.resize(j_dim);
  for (int i = 0; i < j_dim; ++i) {
    sol.lower_perm(i) = spec.lower(sol.permutation[static_cast<size_t>(i)]);
    for (int j = 0; j < j_dim; ++j)
      cov_p(i, j) = spec.cov(sol.permutation[static_cast<size_t>(i)],
                             sol.permutation[static_cast<size_t>(j)]);
  }
  sol.n_trunc = 0;
  while (sol.n_trunc < j_dim && std::isfinite(sol.lower_perm(sol.n_trunc))) ++sol.n_trunc;

  sol.chol = detail::cholesky_with_jitter(cov_p, opts.jitter_scale);
  sol.tilt = Vector::Zero(j_dim);
  sol.saddle = Vector::Zero(j_dim);

  const int m = sol.n_trunc;
  if (m == 0) {
    sol.log_psi_star = 0.0;
    sol.converged = true;
    return sol;
  }
  const Matrix& L = sol.chol;

  // Saddle unknowns: x_1..x_{m-1}, mu_1..mu_{m-1}; mu_m is provably zero.
  const int nfree = m - 1;
  Vector x = Vector::Zero(m);
  Vector mu = Vector::Zero(m);

  auto bounds_t = [&](const Vector& xv, const Vector& muv, Vector& t) {
    for (int k = 0; k < m; ++k) {
      double dot = 0.0;
      for (int i = 0; i < std::min(k, nfree); ++i) dot += L(k, i) * xv(i);
      t(k) = (sol.lower_perm(k) - dot) / L(k, k) - muv(k);
    }
  };

  Vector t(m), r(m), rp(m);
  auto residual_norm = [&](const Vector& xv, const Vector& muv, Vector& fa, Vector& fb) {
    bounds_t(xv, muv, t);
    for (int k = 0; k < m; ++k) {
      r(k) = normal_hazard(t(k));
      rp(k) = r(k) * (r(k) - t(k));
    }
    for (int k = 0; k < nfree; ++k) {
      fa(k) = xv(k) - muv(k) - r(k);
      double acc = 0.0;
      for (int j = k + 1; j < m; ++j) acc += L(j, k) / L(j, j) * r(j);
      fb(k) = muv(k) - acc;
    }
    double norm = 0.0;
    for (int k = 0; k < nfree; ++k) norm = std::max({norm, std::abs(fa(k)), std::abs(fb(k))});
    return norm;
  };

  Vector fa(std::max(nfree, 1)), fb(std::max(nfree, 1));
  double err = residual_norm(x, mu, fa, fb);
  if (nfree > 0) {
    Matrix jac(2 * nfree, 2 * nfree);
    Vector rhs(2 * nfree), step(2 * nfree);
    int iter = 0;
    for (; iter < opts.newton_max_iter && err > opts.newton_tol; ++iter) {
      jac.setZero();
      // blocks: rows [0,nfree) = F_A, rows [nfree,2nfree) = F_B
      for (int k = 0; k < nfree; ++k) {
        jac(k, k) += 1.0;                    // d F_A,k / d x_k
        jac(k, nfree + k) = rp(k) - 1.0;     // d F_A,k / d mu_k
        for (int i = 0; i < k; ++i) jac(k, i) += rp(k) * L(k, i) / L(k, k);
        jac(nfree + k, nfree + k) += 1.0;    // d F_B,k / d mu_k
        for (int j = k + 1; j < m; ++j) {
          const double cjk = L(j, k) / L(j, j);
          if (j < nfree) jac(nfree + k, nfree + j) += cjk * rp(j);
          for (int i = 0; i < std::min(j, nfree); ++i)
            jac(nfree + k, i) += cjk * (L(j, i) / L(j, j)) * rp(j);
        }
      }
      for (int k = 0; k < nfree; ++k) {
        rhs(k) = -fa(k);
        rhs(nfree + k) = -fb(k);
      }
      step = jac.partialPivLu().solve(rhs);
      if (!step.allFinite()) break;

      double scale = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 40; ++ls) {
        Vector x_try = x, mu_try = mu;
        for (int k = 0; k < nfree; ++k) {
          x_try(k) += scale * step(k);
          mu_try(k) += scale * step(nfree + k);
        }
        const double err_try = residual_norm(x_try, mu_try, fa, fb);
        if (err_try < err) {
          x = x_try;
          mu = mu_try;
          err = err_try;
          improved = true;
          break;
        }
        scale *= 0.5;
      }
      if (!improved) break;
    }
    err = residual_norm(x, mu, fa, fb);
  }
  // close the saddle: x_m is the proposal mean of the last coordinate
  x(m - 1) = mu(m - 1) + r(m - 1);

  sol.residual = err;
  sol.converged = (err <= std::max(opts.newton_tol, 1e-8));
  for (int k = 0; k < m; ++k) {
    sol.tilt(k) = mu(k);
    sol.saddle(k) = x(k);
  }
  bounds_t(x, mu, t);
  double psi = 0.0;
  for (int k = 0; k < m; ++k) {
    psi += log_normal_cdf(-t(k)) + 0.5 * mu(k) * mu(k) - mu(k) * x(k);
  }
  sol.log_psi_star = psi;
  return sol;
}

namespace detail {

// One accept-reject proposal; returns log psi and fills z (permuted order).
template <class RngT>
inline double tilting_proposal(const TiltingSolution& sol, RngT& rng, Vector& z) {
  const int j_dim = static_cast<int>(sol.lower_perm.size());
  const Matrix& L = sol.chol;
  double psi = 0.0;
  for (int k = 0; k < j_dim; ++k) {
    double dot = 0.0;
    for (int i = 0; i < k; ++i) dot += L(k, i) * z(i);
    if (k < sol.n_trunc) {
      const double lt = (sol.lower_perm(k) - dot) / L(k, k);
      const double mu_k = sol.tilt(k);
      const double a = lt - mu_k;
      const double draw = truncated_std_normal_lower(a, rng);
      z(k) = mu_k + draw;
      psi += log_normal_cdf(-a) + 0.5 * mu_k * mu_k - mu_k * z(k);
    } else {
      z(k) = rng.normal();
    }
  }
  return psi;
}

// Systematic-scan Gibbs on the truncated region; exact stationary law,
// documented burn-in, correlated draws.
template <class RngT>
inline void gibbs_tmvn(const TruncationSpec& spec, int n, RngT& rng, Matrix& out,
                       const TmvnOptions& opts) {
  const int j_dim = spec.dim();
  Matrix cov = 0.5 * (spec.cov + spec.cov.transpose());
  const double max_diag = std::max(cov.diagonal().maxCoeff(), 1.0);
  Eigen::LLT<Matrix> llt(cov);
  for (int attempt = 0; llt.info() != Eigen::Success && attempt < 6; ++attempt) {
    cov.diagonal().array() += opts.jitter_scale * max_diag * std::pow(10.0, attempt);
    llt.compute(cov);
  }
  if (llt.info() != Eigen::Success)
    throw NumericError("tmvn gibbs: covariance not positive definite");
  const Matrix prec = llt.solve(Matrix::Identity(j_dim, j_dim));

  Vector x(j_dim);
  for (int k = 0; k < j_dim; ++k) {
    x(k) = std::isfinite(spec.lower(k)) ? spec.lower(k) + 0.5 * std::sqrt(cov(k, k)) : 0.0;
  }
  Vector px = prec * x;
  auto sweep = [&]() {
    for (int k = 0; k < j_dim; ++k) {
      const double pkk = prec(k, k);
      const double cond_mean = x(k) - px(k) / pkk;
      const double cond_sd = 1.0 / std::sqrt(pkk);
      double draw;
      if (std::isfinite(spec.lower(k))) {
        const double a = (spec.lower(k) - cond_mean) / cond_sd;
        draw = cond_mean + cond_sd * truncated_std_normal_lower(a, rng);
        draw = std::max(draw, spec.lower(k));
      } else {
        draw = cond_mean + cond_sd * rng.normal();
      }
      const double delta = draw - x(k);
      if (delta != 0.0) {
        px += prec.col(k) * delta;
        x(k) = draw;
      }
    }
  };
  for (int b = 0; b < opts.gibbs_burn_in; ++b) sweep();
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < std::max(1, opts.gibbs_thin); ++t) sweep();
    out.row(i) = x.transpose();
  }
}

}  // namespace detail

// Draws n samples with X >= lower componentwise. Every returned row satisfies
// the bounds; `report` records whether the Gibbs fallback was engaged.
template <class RngT>
inline Matrix sample_tmvn(const TruncationSpec& spec, int n, RngT& rng, TmvnReport* report = nullptr,
                          const TmvnOptions& opts = TmvnOptions()) {
  if (n < 1) throw ConfigError("tmvn: sample count must be positive");
  const int j_dim = spec.dim();
  Matrix out(n, j_dim);
  TmvnReport rep;

  TiltingSolution sol;
  bool tilting_ok = true;
  try {
    sol = solve_tilting(spec, opts);
    tilting_ok = sol.converged;
  } catch (const NumericError&) {
    throw;  // genuinely bad covariance
  }
  rep.tilting_converged = tilting_ok;

  int filled = 0;
  if (tilting_ok) {
    const long budget = std::max<long>(opts.max_attempts, 50L * n);
    Vector z(j_dim);
    Vector x(j_dim);
    while (filled < n && rep.attempts < budget) {
      const double psi = detail::tilting_proposal(sol, rng, z);
      ++rep.attempts;
      if (psi > sol.log_psi_star + 1e-9) ++rep.bound_violations;
      if (std::log(rng.uniform()) <= psi - sol.log_psi_star) {
        x = sol.chol.template triangularView<Eigen::Lower>() * z;
        for (int k = 0; k < j_dim; ++k) {
          const int orig = sol.permutation[static_cast<size_t>(k)];
          out(filled, orig) = std::isfinite(spec.lower(orig)) ? std::max(x(k), spec.lower(orig)) : x(k);
        }
        ++filled;
        ++rep.accepts;
      }
      // starvation check once a meaningful number of proposals has gone by
      if (rep.accepts == 0 && rep.attempts >= 100000 &&
          static_cast<double>(rep.accepts + 1) / static_cast<double>(rep.attempts) < opts.accept_floor)
        break;
    }
    rep.acceptance_rate = rep.attempts > 0
                              ? static_cast<double>(rep.accepts) / static_cast<double>(rep.attempts)
                              : 1.0;
  }

  if (filled < n) {
    rep.used_gibbs = true;
    Matrix rest(n - filled, j_dim);
    detail::gibbs_tmvn(spec, n - filled, rng, rest, opts);
    out.bottomRows(n - filled) = rest;
  }
  if (report) *report = rep;
  return out;
}

// Unbiased importance-sampling estimate of P(Z >= lower) plus its standard
// error, a by-product of the tilting proposal.
template <class RngT>
inline std::pair<double, double> estimate_orthant_prob(const TruncationSpec& spec, int n,
                                                       RngT& rng,
                                                       const TmvnOptions& opts = TmvnOptions()) {
  if (n < 1) throw ConfigError("tmvn: sample count must be positive");
  TiltingSolution sol = solve_tilting(spec, opts);
  if (!sol.converged) throw NumericError("tmvn: tilting solve did not converge");
  Vector z(spec.dim());
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double psi = detail::tilting_proposal(sol, rng, z);
    const double w = std::exp(psi);
    sum += w;
    sumsq += w * w;
  }
  const double mean = sum / n;
  const double var = std::max(0.0, sumsq / n - mean * mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace mirt
