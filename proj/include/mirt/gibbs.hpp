#pragma once

// Logit-link MIRT Gibbs sampler with Polya-Gamma augmentation and an
// adaptive spike-and-slab Gaussian prior on the loadings:
//   B_jk | gamma_jk, tau2_jk ~ N(0, gamma_jk tau2_jk),  gamma_jk in {v0, 1},
//   tau2_jk ~ InverseGamma(a1, a2),  P(gamma = 1) ~ theta, theta ~ U(0,1).
// The link deliberately differs from the probit EM; the two are compared on
// loading-recovery metrics only, never on posteriors.

#include <cmath>
#include <functional>
#include <vector>

#include "mirt/common.hpp"
#include "mirt/model.hpp"
#include "mirt/normal.hpp"
#include "mirt/rng.hpp"

namespace mirt {

namespace detail {

inline double pg_a_coef(int n, double x, double trunc) {
  const double np = M_PI * (n + 0.5);
  if (x > trunc) {
    return np * std::exp(-0.5 * np * np * x);
  }
  const double base = std::pow(2.0 / (M_PI * x), 1.5);
  return np * base * std::exp(-2.0 * (n + 0.5) * (n + 0.5) / x);
}

// CDF of InverseGaussian(mu = 1/z, lambda = 1) at t, parametrised by z >= 0.
inline double pg_igauss_cdf(double t, double z) {
  const double rt = std::sqrt(1.0 / t);
  const double a = rt * (t * z - 1.0);
  const double b = -rt * (t * z + 1.0);
  return normal_cdf(a) + std::exp(2.0 * z + log_normal_cdf(b));
}

// InverseGaussian(1/z, 1) restricted to (0, trunc].
template <class RngT>
inline double pg_rtigauss(double z, double trunc, RngT& rng) {
  z = std::abs(z);
  if (trunc * z < 1.0) {
    // small tilt: rejection from the scaled inverse-chi-square proposal
    for (;;) {
      double e1, e2;
      do {
        e1 = rng.exponential();
        e2 = rng.exponential();
      } while (e1 * e1 > 2.0 * e2 / trunc);
      const double x = trunc / ((1.0 + trunc * e1) * (1.0 + trunc * e1));
      if (std::log(rng.uniform()) <= -0.5 * z * z * x) return x;
    }
  }
  const double mu = 1.0 / z;
  for (;;) {
    double y = rng.normal();
    y = y * y;
    double x = mu + 0.5 * mu * mu * y - 0.5 * mu * std::sqrt(4.0 * mu * y + mu * mu * y * y);
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    if (x <= trunc && x > 0.0) return x;
  }
}

}  // namespace detail

// Exact draw from PG(1, c) by Devroye's alternating-series method
// (Polson, Scott & Windle 2013). Symmetric in c; E[PG(1,c)] = tanh(c/2)/(2c).
template <class RngT>
inline double sample_pg(double c, RngT& rng) {
  const double trunc = 0.64;
  const double z = 0.5 * std::abs(c);
  const double fz = 0.125 * M_PI * M_PI + 0.5 * z * z;
  const double p = (M_PI / (2.0 * fz)) * std::exp(-fz * trunc);
  const double q = 2.0 * std::exp(-z) * detail::pg_igauss_cdf(trunc, z);

  for (;;) {
    double x;
    if (rng.uniform() < p / (p + q)) {
      x = trunc + rng.exponential() / fz;
    } else {
      x = detail::pg_rtigauss(z, trunc, rng);
    }
    double s = detail::pg_a_coef(0, x, trunc);
    const double y = rng.uniform() * s;
    int n = 0;
    for (;;) {
      ++n;
      if (n % 2 == 1) {
        s -= detail::pg_a_coef(n, x, trunc);
        if (y <= s) return 0.25 * x;
      } else {
        s += detail::pg_a_coef(n, x, trunc);
        if (y > s) break;
      }
    }
  }
}

struct GibbsHyper {
  double v0 = 0.01;  // spike variance multiplier
  double a1 = 1.0;   // tau2 ~ InverseGamma(a1, a2)
  double a2 = 1.0;
};

struct GibbsState {
  Matrix theta;     // N x K
  Matrix loading;   // J x K
  Vector intercept; // J
  Matrix omega_pg;  // N x J, positive
  Matrix gamma_ss;  // J x K, entries in {v0, 1}
  Matrix tau2;      // J x K, positive
  double theta_prop = 0.5;
};

inline GibbsState gibbs_init(int n_obs, int j_items, int k, const GibbsHyper& hyper, Rng& rng) {
  GibbsState s;
  s.theta = Matrix::Zero(n_obs, k);
  s.loading = Matrix::Zero(j_items, k);
  s.intercept = Vector::Zero(j_items);
  s.gamma_ss = Matrix::Ones(j_items, k);
  s.tau2 = Matrix::Ones(j_items, k);
  s.theta_prop = 0.5;
  s.omega_pg.resize(n_obs, j_items);
  for (int i = 0; i < n_obs; ++i)
    for (int j = 0; j < j_items; ++j) s.omega_pg(i, j) = sample_pg(0.0, rng);
  (void)hyper;
  return s;
}

// Draw every parameter block from its prior (used by joint-distribution
// correctness checks and for generating synthetic chains).
inline GibbsState gibbs_prior_draw(int n_obs, int j_items, int k, const GibbsHyper& hyper,
                                   Rng& rng) {
  GibbsState s;
  s.theta.resize(n_obs, k);
  for (int i = 0; i < n_obs; ++i)
    for (int c = 0; c < k; ++c) s.theta(i, c) = rng.normal();
  s.intercept.resize(j_items);
  for (int j = 0; j < j_items; ++j) s.intercept(j) = rng.normal();
  s.theta_prop = rng.uniform();
  s.tau2.resize(j_items, k);
  s.gamma_ss.resize(j_items, k);
  s.loading.resize(j_items, k);
  for (int j = 0; j < j_items; ++j)
    for (int c = 0; c < k; ++c) {
      s.tau2(j, c) = hyper.a2 / rng.gamma(hyper.a1);
      s.gamma_ss(j, c) = rng.bernoulli(s.theta_prop) ? 1.0 : hyper.v0;
      s.loading(j, c) = rng.normal() * std::sqrt(s.gamma_ss(j, c) * s.tau2(j, c));
    }
  s.omega_pg.resize(n_obs, j_items);
  for (int i = 0; i < n_obs; ++i)
    for (int j = 0; j < j_items; ++j)
      s.omega_pg(i, j) = sample_pg(s.loading.row(j).dot(s.theta.row(i)) + s.intercept(j), rng);
  return s;
}

// Bernoulli responses under the logistic link at the state's parameters.
inline Matrix gibbs_simulate_y(const GibbsState& s, Rng& rng) {
  const int n = static_cast<int>(s.theta.rows());
  const int j_items = static_cast<int>(s.loading.rows());
  Matrix y(n, j_items);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < j_items; ++j) {
      const double eta = s.loading.row(j).dot(s.theta.row(i)) + s.intercept(j);
      const double pr = 1.0 / (1.0 + std::exp(-eta));
      y(i, j) = rng.bernoulli(pr) ? 1.0 : 0.0;
    }
  return y;
}

// One systematic scan over all full conditionals. `fixed_zero(j, k)` pins
// loadings (used for lower-triangular identification); pass nullptr to
// update everything.
inline void gibbs_sweep(GibbsState& s, const Matrix& y, const GibbsHyper& hyper, Rng& rng,
                        const std::function<bool(int, int)>& fixed_zero = nullptr) {
  const int n = static_cast<int>(y.rows());
  const int j_items = static_cast<int>(y.cols());
  const int k = static_cast<int>(s.loading.cols());

  // latent traits
  for (int i = 0; i < n; ++i) {
    Matrix prec = Matrix::Identity(k, k);
    Vector shift = Vector::Zero(k);
    for (int j = 0; j < j_items; ++j) {
      const double w = s.omega_pg(i, j);
      const double z = (y(i, j) - 0.5) / w;
      prec += w * (s.loading.row(j).transpose() * s.loading.row(j));
      shift += w * (z - s.intercept(j)) * s.loading.row(j).transpose();
    }
    Eigen::LLT<Matrix> llt(prec);
    if (llt.info() != Eigen::Success) throw NumericError("gibbs: theta precision not SPD");
    const Vector mean = llt.solve(shift);
    Vector noise(k);
    for (int c = 0; c < k; ++c) noise(c) = rng.normal();
    s.theta.row(i) = (mean + llt.matrixL().transpose().solve(noise)).transpose();
  }

  // intercepts, N(0,1) prior
  for (int j = 0; j < j_items; ++j) {
    double prec = 1.0, shift = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = s.omega_pg(i, j);
      const double z = (y(i, j) - 0.5) / w;
      prec += w;
      shift += w * (z - s.loading.row(j).dot(s.theta.row(i)));
    }
    s.intercept(j) = shift / prec + rng.normal() / std::sqrt(prec);
  }

  // loadings with spike-and-slab indicators and their variances
  for (int j = 0; j < j_items; ++j) {
    Vector resid(n);  // z - d - theta' B_j, maintained across coordinates
    for (int i = 0; i < n; ++i) {
      const double z = (y(i, j) - 0.5) / s.omega_pg(i, j);
      resid(i) = z - s.intercept(j) - s.loading.row(j).dot(s.theta.row(i));
    }
    for (int c = 0; c < k; ++c) {
      const bool pinned = fixed_zero && fixed_zero(j, c);
      const double old = s.loading(j, c);
      if (!pinned) {
        double prec = 1.0 / (s.gamma_ss(j, c) * s.tau2(j, c));
        double shift = 0.0;
        for (int i = 0; i < n; ++i) {
          const double w = s.omega_pg(i, j);
          const double th = s.theta(i, c);
          prec += w * th * th;
          shift += w * th * (resid(i) + th * old);
        }
        const double updated = shift / prec + rng.normal() / std::sqrt(prec);
        for (int i = 0; i < n; ++i) resid(i) -= s.theta(i, c) * (updated - old);
        s.loading(j, c) = updated;
      } else if (old != 0.0) {
        for (int i = 0; i < n; ++i) resid(i) += s.theta(i, c) * old;
        s.loading(j, c) = 0.0;
      }

      const double b = s.loading(j, c);
      const double t2 = s.tau2(j, c);
      const double log_slab = -0.5 * b * b / t2 - 0.5 * std::log(t2);
      const double log_spike = -0.5 * b * b / (hyper.v0 * t2) - 0.5 * std::log(hyper.v0 * t2);
      const double lo = std::log(s.theta_prop) - std::log1p(-s.theta_prop) + log_slab - log_spike;
      s.gamma_ss(j, c) = rng.bernoulli(1.0 / (1.0 + std::exp(-lo))) ? 1.0 : hyper.v0;
      s.tau2(j, c) =
          (0.5 * b * b / s.gamma_ss(j, c) + hyper.a2) / rng.gamma(hyper.a1 + 0.5);
    }
  }

  // slab proportion
  double slab_count = 0.0;
  for (int j = 0; j < j_items; ++j)
    for (int c = 0; c < k; ++c) slab_count += (s.gamma_ss(j, c) == 1.0) ? 1.0 : 0.0;
  const double total = static_cast<double>(j_items) * k;
  s.theta_prop = rng.beta(slab_count + 1.0, total - slab_count + 1.0);
  s.theta_prop = std::min(std::max(s.theta_prop, 1e-12), 1.0 - 1e-12);

  // Polya-Gamma auxiliaries
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < j_items; ++j)
      s.omega_pg(i, j) = sample_pg(s.loading.row(j).dot(s.theta.row(i)) + s.intercept(j), rng);
}

struct GibbsRun {
  Matrix loading_mean;   // J x K posterior mean over retained sweeps
  Vector intercept_mean; // J
  int retained = 0;
  GibbsState last;
};

// Runs a single chain; `on_retained` (optional) observes every retained
// sweep, e.g. to dump the chain to CSV.
inline GibbsRun run_gibbs(const Matrix& y, int k, int iters, int burn_in, int thin,
                          bool lower_triangular, const GibbsHyper& hyper, Rng& rng,
                          const std::function<void(const GibbsState&)>& on_retained = nullptr) {
  if (iters <= burn_in) throw ConfigError("run_gibbs: iters must exceed burn_in");
  if (thin < 1) throw ConfigError("run_gibbs: thin must be >= 1");
  const int n = static_cast<int>(y.rows());
  const int j_items = static_cast<int>(y.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < j_items; ++j)
      if (y(i, j) != 0.0 && y(i, j) != 1.0)
        throw DataError("run_gibbs: responses must be binary");

  std::function<bool(int, int)> pin = nullptr;
  if (lower_triangular)
    pin = [](int j, int c) { return j < c; };  // upper triangle of the leading K x K block

  GibbsState s = gibbs_init(n, j_items, k, hyper, rng);
  GibbsRun run;
  run.loading_mean = Matrix::Zero(j_items, k);
  run.intercept_mean = Vector::Zero(j_items);
  for (int it = 0; it < iters; ++it) {
    gibbs_sweep(s, y, hyper, rng, pin);
    if (it >= burn_in && (it - burn_in) % thin == 0) {
      run.loading_mean += s.loading;
      run.intercept_mean += s.intercept;
      ++run.retained;
      if (on_retained) on_retained(s);
    }
  }
  run.loading_mean /= std::max(1, run.retained);
  run.intercept_mean /= std::max(1, run.retained);
  run.last = std::move(s);
  return run;
}

// Support size of a loading matrix after thresholding at t.
inline int support_count(const Matrix& loading, double threshold) {
  int count = 0;
  for (int j = 0; j < loading.rows(); ++j)
    for (int c = 0; c < loading.cols(); ++c)
      if (std::abs(loading(j, c)) > threshold) ++count;
  return count;
}

}  // namespace mirt
