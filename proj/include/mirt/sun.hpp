#pragma once

// Latent-factor posteriors under the probit model. For a Gaussian prior the
// posterior of theta given a mixed binary/ordinal/continuous response row is
// unified skew-normal (Durante 2019 gives the probit-regression case):
//
//   theta | y  =d=  xi_post + V0 + T V1,
//
// where V0 is Gaussian, V1 is a truncated normal over the skew block, and T
// is a K x Jbar linear map. Continuous items enter through exact Gaussian
// conditioning (xi_post, omega_post); each binary item and each boundary
// ordinal cell contributes one one-sided row; each interior ordinal cell
// contributes a 2-row block expressing Phi(b) - Phi(a) as a degenerate
// bivariate normal CDF.
//
// Sampling uses the minimax-tilting TMVN sampler for the V1 block when the
// block is small enough, and otherwise an exact-stationary data-augmentation
// Gibbs chain in theta space (documented burn-in, flagged in the report).

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "mirt/common.hpp"
#include "mirt/model.hpp"
#include "mirt/normal.hpp"
#include "mirt/rng.hpp"
#include "mirt/tmvn.hpp"

namespace mirt {

inline constexpr double kOrdinalBlockJitter = 1e-6;

// Phi(b) - Phi(a), the graded-response cell probability. `a` may be -inf.
inline double cdf_difference(double a, double b) {
  if (b < a) throw ConfigError("cdf_difference: requires b >= a");
  if (a == -kPosInf) return normal_cdf(b);
  return normal_interval_prob(a, b);
}

// Same quantity through the 2-D representation
// Phi_2([b, -a]; [[1,-1],[-1,1]]) = P(Z <= b, -Z <= -a).
inline double cdf_difference_bvn(double a, double b) {
  if (b < a) throw ConfigError("cdf_difference: requires b >= a");
  if (a == -kPosInf) return normal_cdf(b);
  return bvn_cdf(b, -a, -1.0);
}

// Stacked skew-block pieces of the mixed-type posterior plus the Gaussian
// conditioning output from continuous items.
struct MixedBlocks {
  Matrix d_bar;                 // jbar x K rows
  Vector v_bar;                 // jbar offsets
  std::vector<int> pair_first;  // row indices starting a 2-row interior block
  Vector xi_post;               // K
  Matrix omega_post;            // K x K

  int j_bar() const { return static_cast<int>(v_bar.size()); }
  bool is_pair_row(int j) const {
    for (int p : pair_first)
      if (p == j || p + 1 == j) return true;
    return false;
  }
};

struct SunParams {
  Vector xi;         // K
  Matrix omega_mat;  // K x K, SPD
  Matrix delta;      // K x jbar skewness
  Vector gamma_vec;  // jbar
  Matrix gamma_mat;  // jbar x jbar, unit diagonal
  MixedBlocks blocks;

  int dim() const { return static_cast<int>(xi.size()); }
  int j_bar() const { return static_cast<int>(gamma_vec.size()); }
};

namespace detail {

// D_bar' Ibar^{-1} u, computed blockwise so the near-singular 2x2 inverses
// never materialise.
inline Vector apply_dbar_t_ibar_inv(const MixedBlocks& b, const Vector& u, double eps) {
  const int k = static_cast<int>(b.omega_post.rows());
  Vector out = Vector::Zero(k);
  const double pair_scale = 1.0 / (2.0 + eps);
  std::vector<bool> in_pair(static_cast<size_t>(b.j_bar()), false);
  for (int p : b.pair_first) {
    in_pair[static_cast<size_t>(p)] = true;
    in_pair[static_cast<size_t>(p) + 1] = true;
  }
  for (int j = 0; j < b.j_bar(); ++j) {
    if (!in_pair[static_cast<size_t>(j)]) out += b.d_bar.row(j).transpose() * u(j);
  }
  for (int p : b.pair_first) {
    out += b.d_bar.row(p).transpose() * ((u(p) - u(p + 1)) * pair_scale);
  }
  return out;
}

inline Matrix dbar_t_ibar_inv_dbar(const MixedBlocks& b, double eps) {
  const int k = static_cast<int>(b.omega_post.rows());
  Matrix out = Matrix::Zero(k, k);
  const double pair_weight = 2.0 / (2.0 + eps);
  std::vector<bool> in_pair(static_cast<size_t>(b.j_bar()), false);
  for (int p : b.pair_first) {
    in_pair[static_cast<size_t>(p)] = true;
    in_pair[static_cast<size_t>(p) + 1] = true;
  }
  for (int j = 0; j < b.j_bar(); ++j) {
    if (!in_pair[static_cast<size_t>(j)])
      out += b.d_bar.row(j).transpose() * b.d_bar.row(j);
  }
  for (int p : b.pair_first) {
    out += pair_weight * (b.d_bar.row(p).transpose() * b.d_bar.row(p));
  }
  return out;
}

inline SunParams assemble_sun(MixedBlocks blocks) {
  const int jbar = blocks.j_bar();
  const int k = static_cast<int>(blocks.omega_post.rows());
  SunParams p;
  p.xi = blocks.xi_post;
  p.omega_mat = blocks.omega_post;

  Vector s(jbar);
  for (int j = 0; j < jbar; ++j) {
    const double q = blocks.d_bar.row(j) * blocks.omega_post * blocks.d_bar.row(j).transpose();
    s(j) = std::sqrt(q + 1.0);
  }

  const Vector omega_sqrt = blocks.omega_post.diagonal().cwiseSqrt();
  // Delta = omegabar * omega * Dbar' * S^{-1} = omega^{-1} * Omega * Dbar' * S^{-1}
  p.delta.resize(k, jbar);
  for (int j = 0; j < jbar; ++j) {
    Vector col = blocks.omega_post * blocks.d_bar.row(j).transpose() / s(j);
    p.delta.col(j) = col.cwiseQuotient(omega_sqrt);
  }

  p.gamma_vec = (blocks.d_bar * blocks.xi_post + blocks.v_bar).cwiseQuotient(s);

  p.gamma_mat = blocks.d_bar * blocks.omega_post * blocks.d_bar.transpose();
  p.gamma_mat.diagonal().array() += 1.0;
  for (int q : blocks.pair_first) {
    p.gamma_mat(q, q + 1) -= 1.0;
    p.gamma_mat(q + 1, q) -= 1.0;
  }
  for (int j = 0; j < jbar; ++j)
    for (int i = 0; i < jbar; ++i) p.gamma_mat(i, j) /= s(i) * s(j);

  p.blocks = std::move(blocks);
  return p;
}

}  // namespace detail

// Posterior parameters for an all-binary response row (probit MIRT link).
inline SunParams binary_sun_params(const Matrix& loading, const Vector& intercept,
                                   const Vector& y, const Vector& prior_mean,
                                   const Matrix& prior_cov) {
  const int j_items = static_cast<int>(y.size());
  if (loading.rows() != j_items || intercept.size() != j_items)
    throw ConfigError("binary_sun_params: dimension mismatch");
  MixedBlocks b;
  b.xi_post = prior_mean;
  b.omega_post = prior_cov;
  b.d_bar.resize(j_items, loading.cols());
  b.v_bar.resize(j_items);
  for (int j = 0; j < j_items; ++j) {
    if (y(j) != 0.0 && y(j) != 1.0) throw DataError("binary_sun_params: response not in {0,1}");
    const double sign = 2.0 * y(j) - 1.0;
    b.d_bar.row(j) = sign * loading.row(j);
    b.v_bar(j) = sign * intercept(j);
  }
  return detail::assemble_sun(std::move(b));
}

// Posterior parameters for a mixed-type response row. Continuous items enter
// only through Gaussian conditioning; boundary ordinal cells (y in {0, L-1})
// act as sign-flipped probit rows; interior cells form 2-row CDF blocks.
inline SunParams mixed_sun_params(const ModelParams& params, const std::vector<ItemSpec>& items,
                                  const Vector& y, const Vector& prior_mean,
                                  const Matrix& prior_cov) {
  const int j_items = static_cast<int>(items.size());
  if (params.n_items() != j_items || y.size() != j_items)
    throw ConfigError("mixed_sun_params: dimension mismatch");
  const int k = params.k_star();

  MixedBlocks b;
  // Continuous part: conjugate conditioning on the centered Gaussian items.
  bool any_continuous = false;
  Matrix prec = Matrix::Zero(k, k);
  Vector shift = Vector::Zero(k);
  for (int j = 0; j < j_items; ++j) {
    if (items[static_cast<size_t>(j)].kind.type != ItemType::Continuous) continue;
    const double s2 = params.resid_var(j);
    if (!(s2 > 0.0)) throw ConfigError("mixed_sun_params: residual variance must be positive");
    any_continuous = true;
    prec += (params.loading.row(j).transpose() * params.loading.row(j)) / s2;
    shift += params.loading.row(j).transpose() * (y(j) / s2);
  }
  if (any_continuous) {
    Matrix full = prec;
    Eigen::LLT<Matrix> prior_llt(prior_cov);
    if (prior_llt.info() != Eigen::Success)
      throw NumericError("mixed_sun_params: prior covariance not SPD");
    full += prior_llt.solve(Matrix::Identity(k, k));
    Eigen::LLT<Matrix> llt(full);
    if (llt.info() != Eigen::Success)
      throw NumericError("mixed_sun_params: conditioning precision not SPD");
    b.omega_post = llt.solve(Matrix::Identity(k, k));
    b.omega_post = 0.5 * (b.omega_post + b.omega_post.transpose());
    b.xi_post = llt.solve(shift + prior_llt.solve(prior_mean));
  } else {
    b.omega_post = prior_cov;
    b.xi_post = prior_mean;
  }

  // Skew rows: binary items first, then boundary ordinal cells, then the
  // interior 2-row blocks; this fixed stacking keeps the all-binary case
  // identical to binary_sun_params.
  std::vector<Vector> rows;
  std::vector<double> offs;
  for (int j = 0; j < j_items; ++j) {
    const ItemKind& kind = items[static_cast<size_t>(j)].kind;
    if (kind.type != ItemType::Binary) continue;
    if (y(j) != 0.0 && y(j) != 1.0) throw DataError("mixed_sun_params: binary response not in {0,1}");
    const double sign = 2.0 * y(j) - 1.0;
    rows.push_back(sign * params.loading.row(j).transpose());
    offs.push_back(sign * params.intercept(j));
  }
  for (int j = 0; j < j_items; ++j) {
    const ItemKind& kind = items[static_cast<size_t>(j)].kind;
    if (kind.type != ItemType::Ordinal) continue;
    const int level = static_cast<int>(y(j));
    if (y(j) != level || level < 0 || level > kind.levels - 1)
      throw DataError("mixed_sun_params: ordinal response out of range");
    const Vector& d = params.intercepts[static_cast<size_t>(j)];
    if (level == 0) {
      rows.push_back(params.loading.row(j).transpose());
      offs.push_back(d(0));
    } else if (level == kind.levels - 1) {
      rows.push_back(-params.loading.row(j).transpose());
      offs.push_back(-d(level - 1));
    }
  }
  std::vector<int> pair_first;
  for (int j = 0; j < j_items; ++j) {
    const ItemKind& kind = items[static_cast<size_t>(j)].kind;
    if (kind.type != ItemType::Ordinal) continue;
    const int level = static_cast<int>(y(j));
    if (level == 0 || level == kind.levels - 1) continue;
    const Vector& d = params.intercepts[static_cast<size_t>(j)];
    pair_first.push_back(static_cast<int>(rows.size()));
    rows.push_back(params.loading.row(j).transpose());
    offs.push_back(d(level));
    rows.push_back(-params.loading.row(j).transpose());
    offs.push_back(-d(level - 1));
  }

  const int jbar = static_cast<int>(rows.size());
  b.d_bar.resize(jbar, k);
  b.v_bar.resize(jbar);
  for (int j = 0; j < jbar; ++j) {
    b.d_bar.row(j) = rows[static_cast<size_t>(j)].transpose();
    b.v_bar(j) = offs[static_cast<size_t>(j)];
  }
  b.pair_first = std::move(pair_first);
  return detail::assemble_sun(std::move(b));
}

struct SunSampleOptions {
  int exact_dim_limit = 40;  // largest skew block handed to the tilting sampler
  int gibbs_burn_in = 100;
  TmvnOptions tmvn;
};

struct SunSampleReport {
  bool exact = true;          // i.i.d. draws via tilting accept-reject
  bool mcmc_fallback = false; // theta-space augmentation Gibbs engaged
  bool jittered_pairs = false;
  TmvnReport tmvn;
};

namespace detail {

// Collapsed sampler for the SUN posterior when the skew block is too large
// for accept-reject: one latent z_u = -a_u' theta + eps_u per one-sided row
// and per interior pair, with theta integrated out. The z marginal is a
// truncated Gaussian with covariance I + A Omega_post A' (weakly coupled
// coordinates, healthy mixing even for tight theta posteriors); each
// retained sweep draws theta | z exactly.
template <class RngT>
inline Matrix sample_sun_augmented(const SunParams& p, int m, RngT& rng,
                                   const SunSampleOptions& opts) {
  const MixedBlocks& b = p.blocks;
  const int k = p.dim();
  const int jbar = b.j_bar();

  struct Unit {
    Vector a;
    double lo, hi;
  };
  std::vector<Unit> units;
  std::vector<bool> in_pair(static_cast<size_t>(jbar), false);
  for (int q : b.pair_first) {
    in_pair[static_cast<size_t>(q)] = true;
    in_pair[static_cast<size_t>(q) + 1] = true;
  }
  for (int j = 0; j < jbar; ++j) {
    if (in_pair[static_cast<size_t>(j)]) continue;
    units.push_back({b.d_bar.row(j).transpose(), -kPosInf, b.v_bar(j)});
  }
  for (int q : b.pair_first) {
    // rows (a, d_hi) and (-a, -d_lo): the latent lives in (d_lo, d_hi]
    units.push_back({b.d_bar.row(q).transpose(), -b.v_bar(q + 1), b.v_bar(q)});
  }
  const int n_units = static_cast<int>(units.size());

  Eigen::LLT<Matrix> om_llt(p.omega_mat);
  if (om_llt.info() != Eigen::Success) throw NumericError("sample_sun: omega_post not SPD");
  Matrix q_prec = om_llt.solve(Matrix::Identity(k, k));
  const Vector prior_shift = q_prec * p.xi;
  for (const Unit& u : units) q_prec += u.a * u.a.transpose();
  Eigen::LLT<Matrix> q_llt(0.5 * (q_prec + q_prec.transpose()));
  if (q_llt.info() != Eigen::Success) throw NumericError("sample_sun: augmented precision not SPD");
  const Matrix q_cov = q_llt.solve(Matrix::Identity(k, k));
  Eigen::LLT<Matrix> cov_llt(0.5 * (q_cov + q_cov.transpose()));
  const Matrix q_chol = cov_llt.matrixL();

  // collapsed-chain precomputations: Q a_u and 1 - a_u' Q a_u
  Matrix qa(k, std::max(n_units, 1));
  Vector cond_prec(std::max(n_units, 1));
  Vector mean_z(std::max(n_units, 1)), z(std::max(n_units, 1));
  for (int u = 0; u < n_units; ++u) {
    qa.col(u) = q_llt.solve(units[static_cast<size_t>(u)].a);
    cond_prec(u) = std::max(1.0 - units[static_cast<size_t>(u)].a.dot(qa.col(u)), 1e-12);
    mean_z(u) = -units[static_cast<size_t>(u)].a.dot(p.xi);
    const double lo = units[static_cast<size_t>(u)].lo;
    const double hi = units[static_cast<size_t>(u)].hi;
    z(u) = std::isfinite(lo) ? 0.5 * (lo + hi) : std::min(hi, mean_z(u)) - 0.5;
  }
  Vector t = Vector::Zero(k);
  for (int u = 0; u < n_units; ++u)
    t += (z(u) - mean_z(u)) * units[static_cast<size_t>(u)].a;

  auto sweep = [&]() {
    for (int u = 0; u < n_units; ++u) {
      const Unit& unit = units[static_cast<size_t>(u)];
      const double pw = (z(u) - mean_z(u)) - qa.col(u).dot(t);
      const double prec = cond_prec(u);
      const double cond_mean = z(u) - pw / prec;
      const double cond_sd = 1.0 / std::sqrt(prec);
      const double a = (unit.lo - cond_mean) / cond_sd;
      const double bb = (unit.hi - cond_mean) / cond_sd;
      double draw = cond_mean + cond_sd * truncated_std_normal_interval(a, bb, rng);
      draw = std::min(std::max(draw, unit.lo), unit.hi);
      const double delta = draw - z(u);
      if (delta != 0.0) {
        t += delta * unit.a;
        z(u) = draw;
      }
    }
  };

  for (int s = 0; s < opts.gibbs_burn_in; ++s) sweep();

  Matrix out(m, k);
  Vector noise(k);
  for (int d = 0; d < m; ++d) {
    sweep();
    Vector az = t;
    for (int u = 0; u < n_units; ++u) az += mean_z(u) * units[static_cast<size_t>(u)].a;
    const Vector mean = q_llt.solve(prior_shift - az);
    for (int i = 0; i < k; ++i) noise(i) = rng.normal();
    out.row(d) = (mean + q_chol * noise).transpose();
  }
  return out;
}

}  // namespace detail

// m draws from the SUN posterior via the additive representation
// theta = xi_post + V0 + T V1 with V0 ~ N(0, W), W = (Omega^{-1} + Dbar' Ibar^{-1} Dbar)^{-1}.
template <class RngT>
inline Matrix sample_sun(const SunParams& p, int m, RngT& rng, SunSampleReport* report = nullptr,
                         const SunSampleOptions& opts = SunSampleOptions()) {
  if (m < 1) throw ConfigError("sample_sun: need at least one draw");
  const int k = p.dim();
  const int jbar = p.j_bar();
  SunSampleReport rep;

  if (jbar == 0) {
    Eigen::LLT<Matrix> llt(p.omega_mat);
    if (llt.info() != Eigen::Success) throw NumericError("sample_sun: omega_post not SPD");
    const Matrix chol = llt.matrixL();
    Matrix out(m, k);
    Vector noise(k);
    for (int i = 0; i < m; ++i) {
      for (int d = 0; d < k; ++d) noise(d) = rng.normal();
      out.row(i) = (p.xi + chol * noise).transpose();
    }
    if (report) *report = rep;
    return out;
  }

  if (jbar > opts.exact_dim_limit) {
    rep.exact = false;
    rep.mcmc_fallback = true;
    Matrix out = detail::sample_sun_augmented(p, m, rng, opts);
    if (report) *report = rep;
    return out;
  }

  const double eps = p.blocks.pair_first.empty() ? 0.0 : kOrdinalBlockJitter;
  rep.jittered_pairs = !p.blocks.pair_first.empty();

  Vector s(jbar);
  for (int j = 0; j < jbar; ++j) {
    const double q = p.blocks.d_bar.row(j) * p.omega_mat * p.blocks.d_bar.row(j).transpose();
    s(j) = std::sqrt(q + 1.0);
  }

  TruncationSpec spec;
  spec.cov = p.gamma_mat;
  for (int q : p.blocks.pair_first) {
    spec.cov(q, q) += eps / (s(q) * s(q));
    spec.cov(q + 1, q + 1) += eps / (s(q + 1) * s(q + 1));
  }
  spec.lower = -p.gamma_vec;

  TmvnOptions tmvn_opts = opts.tmvn;
  Matrix v1 = sample_tmvn(spec, m, rng, &rep.tmvn, tmvn_opts);
  rep.exact = !rep.tmvn.used_gibbs;
  rep.mcmc_fallback = rep.tmvn.used_gibbs;

  Eigen::LLT<Matrix> om_llt(p.omega_mat);
  if (om_llt.info() != Eigen::Success) throw NumericError("sample_sun: omega_post not SPD");
  Matrix w_prec = om_llt.solve(Matrix::Identity(k, k)) + detail::dbar_t_ibar_inv_dbar(p.blocks, eps);
  Eigen::LLT<Matrix> w_llt(0.5 * (w_prec + w_prec.transpose()));
  if (w_llt.info() != Eigen::Success) throw NumericError("sample_sun: W precision not SPD");
  const Matrix w_cov = w_llt.solve(Matrix::Identity(k, k));
  Eigen::LLT<Matrix> w_cov_llt(0.5 * (w_cov + w_cov.transpose()));
  const Matrix w_chol = w_cov_llt.matrixL();

  Matrix out(m, k);
  Vector noise(k);
  for (int i = 0; i < m; ++i) {
    const Vector u = s.cwiseProduct(v1.row(i).transpose());
    const Vector tv = w_llt.solve(detail::apply_dbar_t_ibar_inv(p.blocks, u, eps));
    for (int d = 0; d < k; ++d) noise(d) = rng.normal();
    out.row(i) = (p.xi + w_chol * noise + tv).transpose();
  }
  if (report) *report = rep;
  return out;
}

// Unnormalised log-density of the SUN posterior: Gaussian kernel times the
// blockwise CDF factor (each one-sided row a univariate Phi, each interior
// pair an exact degenerate-bivariate CDF). Used by tests and diagnostics.
inline double sun_log_density_unnormalized(const SunParams& p, const Vector& theta) {
  const MixedBlocks& b = p.blocks;
  Eigen::LLT<Matrix> llt(p.omega_mat);
  if (llt.info() != Eigen::Success) throw NumericError("sun density: omega not SPD");
  const Vector centered = theta - p.xi;
  const Vector half = llt.matrixL().solve(centered);
  double logp = -0.5 * half.squaredNorm();
  for (int i = 0; i < p.dim(); ++i) logp -= std::log(llt.matrixL()(i, i)) + kLogSqrt2Pi;

  std::vector<bool> in_pair(static_cast<size_t>(b.j_bar()), false);
  for (int q : b.pair_first) {
    in_pair[static_cast<size_t>(q)] = true;
    in_pair[static_cast<size_t>(q) + 1] = true;
  }
  for (int j = 0; j < b.j_bar(); ++j) {
    if (in_pair[static_cast<size_t>(j)]) continue;
    logp += log_normal_cdf(b.d_bar.row(j).dot(theta) + b.v_bar(j));
  }
  for (int q : b.pair_first) {
    const double hi = b.d_bar.row(q).dot(theta) + b.v_bar(q);
    const double neg_lo = b.d_bar.row(q + 1).dot(theta) + b.v_bar(q + 1);
    logp += std::log(std::max(cdf_difference(-neg_lo, hi), 1e-300));
  }
  return logp;
}

// Monte Carlo scoring of a fitted respondent: posterior mean and sd of each
// latent dimension from m SUN draws under the N(0, I) prior.
template <class RngT>
inline std::pair<Vector, Vector> score_factors(const ModelParams& params,
                                               const std::vector<ItemSpec>& items, const Vector& y,
                                               int m, RngT& rng,
                                               const SunSampleOptions& opts = SunSampleOptions()) {
  const int k = params.k_star();
  const SunParams p = mixed_sun_params(params, items, y, Vector::Zero(k), Matrix::Identity(k, k));
  const Matrix draws = sample_sun(p, m, rng, nullptr, opts);
  const Vector mean = draws.colwise().mean();
  Vector sd(k);
  for (int d = 0; d < k; ++d) {
    const double c = (draws.col(d).array() - mean(d)).square().sum() / std::max(1, m - 1);
    sd(d) = std::sqrt(c);
  }
  return {mean, sd};
}

}  // namespace mirt
