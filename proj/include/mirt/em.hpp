#pragma once

// Monte-Carlo EM with parameter expansion for the sparse probit MIRT model.
//
// Each iteration: (E) draw M latent-factor samples per respondent from the
// exact SUN posterior and update the slab inclusion expectations <gamma>;
// (M) refit every item by its penalized regression and update the ordered
// inclusion weights; (rotation) multiply the loadings by the lower Cholesky
// factor of the pooled second moment of the draws. A ladder of increasing
// spike penalties refits with warm starts until the solution stabilises.

#include <chrono>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "mirt/common.hpp"
#include "mirt/model.hpp"
#include "mirt/rng.hpp"
#include "mirt/solvers.hpp"
#include "mirt/sun.hpp"
#include "mirt/threads.hpp"

namespace mirt {

struct LatentDraws {
  std::vector<Matrix> per_obs;  // each M x K
  Matrix pooled_second_moment;  // K x K, (1/NM) sum theta theta'
  int iteration = 0;
  int m_samples = 0;
  bool mcmc_fallback = false;

  Matrix stacked() const {
    const int n = static_cast<int>(per_obs.size());
    if (n == 0) return Matrix();
    const int m = static_cast<int>(per_obs.front().rows());
    const int k = static_cast<int>(per_obs.front().cols());
    Matrix x(static_cast<long>(n) * m, k);
    for (int i = 0; i < n; ++i) x.middleRows(static_cast<long>(i) * m, m) = per_obs[static_cast<size_t>(i)];
    return x;
  }
};

struct LadderConfig {
  double lambda1 = 0.5;
  std::vector<double> lambda0 = {0.5, 1, 3, 6, 10, 20, 30, 40};
  double tol = 0.06;
  int max_iter = 100;
};

struct ProgressInfo {
  int rung = 0;
  double lambda0 = 0.0;
  int iteration = 0;
  int m_samples = 0;
  double max_abs_change = 0.0;
  double seconds_elapsed = 0.0;
};

struct EmOptions {
  bool rotate = true;
  int threads = 1;
  SunSampleOptions sun;
  std::function<void(const ProgressInfo&)> progress;
};

// Posterior inclusion probability of the slab component, elementwise:
// <gamma> = c psi(B|l1) / (c psi(B|l1) + (1-c) psi(B|l0)).
inline Matrix gamma_expectation(const Matrix& loading, const Vector& ibp_weights, double lambda1,
                                double lambda0) {
  const int j_items = static_cast<int>(loading.rows());
  const int k = static_cast<int>(loading.cols());
  Matrix out(j_items, k);
  for (int col = 0; col < k; ++col) {
    const double c =
        std::min(std::max(ibp_weights(col), kIbpWeightFloor), 1.0 - kIbpWeightFloor);
    const double base = std::log(c) - std::log1p(-c) + std::log(lambda1) - std::log(lambda0);
    for (int j = 0; j < j_items; ++j) {
      const double lo = base + (lambda0 - lambda1) * std::abs(loading(j, col));
      out(j, col) = 1.0 / (1.0 + std::exp(-lo));
    }
  }
  return out;
}

namespace detail {

// Collapsed latent-layer sampler for the EM E-step under the N(0, I) prior.
//
// Each non-continuous item carries one latent z_u = -a_u' theta + eps_u
// confined to an interval: one-sided for binary items and boundary ordinal
// cells, two-sided for interior ordinal cells. Marginalising theta out, z is
// a truncated Gaussian with covariance I + A Omega_post A' whose coordinates
// are only weakly coupled, so systematic-scan Gibbs on z mixes well even
// when the theta posterior is tight. (Alternating theta <-> z instead has
// autocorrelation ~ JB^2/(1+JB^2), which stalls at benchmark scale.) Each
// retained sweep finishes with an exact theta | z draw.
//
// The factorisations depend on the response row only through signs that
// cancel in the Gram matrices, so they are shared by all respondents.
class SharedAugmentedSampler {
 public:
  SharedAugmentedSampler(const ModelParams& params, const std::vector<ItemSpec>& items)
      : params_(params), items_(items) {
    const int k = params.k_star();
    const int j_items = params.n_items();
    Matrix omega_post_prec = Matrix::Identity(k, k);
    Matrix unit_gram = Matrix::Zero(k, k);
    for (int j = 0; j < j_items; ++j) {
      const ItemKind& kind = items[static_cast<size_t>(j)].kind;
      const Matrix outer = params.loading.row(j).transpose() * params.loading.row(j);
      if (kind.type == ItemType::Continuous) {
        omega_post_prec += outer / params.resid_var(j);
      } else {
        unit_gram += outer;
        unit_items_.push_back(j);
      }
    }
    prior_prec_ldlt_.compute(omega_post_prec);
    q_llt_.compute(omega_post_prec + unit_gram);  // Q^{-1} = Omega_post^{-1} + A'A
    if (q_llt_.info() != Eigen::Success) throw NumericError("e-step: latent precision not SPD");
    const Matrix q_cov = q_llt_.solve(Matrix::Identity(k, k));
    Eigen::LLT<Matrix> cov_llt(0.5 * (q_cov + q_cov.transpose()));
    q_chol_ = cov_llt.matrixL();

    const int n_units = static_cast<int>(unit_items_.size());
    qb_.resize(k, std::max(n_units, 1));
    cond_prec_.resize(std::max(n_units, 1));
    for (int u = 0; u < n_units; ++u) {
      const Vector b = params.loading.row(unit_items_[static_cast<size_t>(u)]).transpose();
      qb_.col(u) = q_llt_.solve(b);
      cond_prec_(u) = std::max(1.0 - b.dot(qb_.col(u)), 1e-12);
    }
  }

  // M draws for one respondent row: burn_in sweeps of the collapsed z chain,
  // then one sweep plus an exact theta | z draw per retained sample.
  Matrix sample(const Vector& y, int m, Rng& rng, int burn_in) const {
    const int k = params_.k_star();
    const int n_units = static_cast<int>(unit_items_.size());

    // conditioning on the continuous items: xi_post solves
    // Omega_post^{-1} xi_post = shift_c
    Vector shift_c = Vector::Zero(k);
    for (int j = 0; j < params_.n_items(); ++j) {
      if (items_[static_cast<size_t>(j)].kind.type != ItemType::Continuous) continue;
      shift_c += params_.loading.row(j).transpose() * (y(j) / params_.resid_var(j));
    }
    const Vector xi_post = prior_prec_ldlt_.solve(shift_c);

    Vector sign(std::max(n_units, 1)), lo(std::max(n_units, 1)), hi(std::max(n_units, 1));
    for (int u = 0; u < n_units; ++u) {
      const int j = unit_items_[static_cast<size_t>(u)];
      const ItemKind& kind = items_[static_cast<size_t>(j)].kind;
      if (kind.type == ItemType::Binary) {
        const double s = 2.0 * y(j) - 1.0;
        sign(u) = s;
        lo(u) = -kPosInf;
        hi(u) = s * params_.intercept(j);
      } else {
        const int level = static_cast<int>(y(j));
        const Vector& d = params_.intercepts[static_cast<size_t>(j)];
        if (level == 0) {
          sign(u) = 1.0;
          lo(u) = -kPosInf;
          hi(u) = d(0);
        } else if (level == kind.levels - 1) {
          sign(u) = -1.0;
          lo(u) = -kPosInf;
          hi(u) = -d(level - 1);
        } else {
          sign(u) = 1.0;
          lo(u) = d(level - 1);
          hi(u) = d(level);
        }
      }
    }

    // z has marginal mean -A xi_post; keep t = A'(z - mean_z) updated
    Vector mean_z(std::max(n_units, 1)), z(std::max(n_units, 1));
    for (int u = 0; u < n_units; ++u) {
      const int j = unit_items_[static_cast<size_t>(u)];
      mean_z(u) = -sign(u) * params_.loading.row(j).dot(xi_post);
      z(u) = std::isfinite(lo(u)) ? 0.5 * (lo(u) + hi(u)) : std::min(hi(u), mean_z(u)) - 0.5;
    }
    Vector t = Vector::Zero(k);
    for (int u = 0; u < n_units; ++u) {
      const int j = unit_items_[static_cast<size_t>(u)];
      t += (sign(u) * (z(u) - mean_z(u))) * params_.loading.row(j).transpose();
    }

    auto sweep = [&]() {
      for (int u = 0; u < n_units; ++u) {
        const int j = unit_items_[static_cast<size_t>(u)];
        const double w_u = z(u) - mean_z(u);
        const double pw = w_u - sign(u) * qb_.col(u).dot(t);  // (P (z - mean))_u
        const double prec = cond_prec_(u);
        const double cond_mean = z(u) - pw / prec;
        const double cond_sd = 1.0 / std::sqrt(prec);
        const double a = (lo(u) - cond_mean) / cond_sd;
        const double b = (hi(u) - cond_mean) / cond_sd;
        double draw = cond_mean + cond_sd * truncated_std_normal_interval(a, b, rng);
        draw = std::min(std::max(draw, lo(u)), hi(u));
        const double delta = draw - z(u);
        if (delta != 0.0) {
          t += (sign(u) * delta) * params_.loading.row(j).transpose();
          z(u) = draw;
        }
      }
    };

    for (int s = 0; s < burn_in; ++s) sweep();

    Matrix out(m, k);
    Vector noise(k);
    for (int d = 0; d < m; ++d) {
      sweep();
      // theta | z ~ N(Q(shift_c - A'z), Q) with A'z = t + A' mean_z
      Vector az = t;
      for (int u = 0; u < n_units; ++u) {
        const int j = unit_items_[static_cast<size_t>(u)];
        az += (sign(u) * mean_z(u)) * params_.loading.row(j).transpose();
      }
      const Vector mean = q_llt_.solve(shift_c - az);
      for (int c = 0; c < k; ++c) noise(c) = rng.normal();
      out.row(d) = (mean + q_chol_ * noise).transpose();
    }
    return out;
  }

 private:
  const ModelParams& params_;
  const std::vector<ItemSpec>& items_;
  std::vector<int> unit_items_;
  Eigen::LDLT<Matrix> prior_prec_ldlt_;
  Eigen::LLT<Matrix> q_llt_;
  Matrix q_chol_;
  Matrix qb_;         // K x n_units, Q b_j per unit
  Vector cond_prec_;  // 1 - b_j' Q b_j per unit
};

// Skew-block dimension of one respondent row (binary + boundary rows count
// one, interior ordinal cells count two).
inline int skew_dim(const std::vector<ItemSpec>& items, const Vector& y) {
  int jbar = 0;
  for (size_t j = 0; j < items.size(); ++j) {
    const ItemKind& kind = items[j].kind;
    if (kind.type == ItemType::Binary) ++jbar;
    else if (kind.type == ItemType::Ordinal) {
      const int level = static_cast<int>(y(static_cast<int>(j)));
      jbar += (level == 0 || level == kind.levels - 1) ? 1 : 2;
    }
  }
  return jbar;
}

}  // namespace detail

struct EStepResult {
  LatentDraws draws;
  Matrix gamma_expect;
};

// E-step: M posterior draws per respondent plus slab expectations.
// Substreams are keyed by (rung, iteration, observation), so the result is
// reproducible for any thread count.
inline EStepResult e_step(const ResponseMatrix& data, const ModelParams& params, int m_samples,
                          double lambda1, double lambda0, const Rng& base_rng, int rung,
                          int iteration, const EmOptions& opts = EmOptions()) {
  const int n = data.n_obs();
  const int k = params.k_star();
  EStepResult result;
  result.draws.per_obs.resize(static_cast<size_t>(n));
  result.draws.iteration = iteration;
  result.draws.m_samples = m_samples;

  const detail::SharedAugmentedSampler shared(params, data.items);
  const Vector prior_mean = Vector::Zero(k);
  const Matrix prior_cov = Matrix::Identity(k, k);
  std::vector<char> fallback_flags(static_cast<size_t>(n), 0);

  parallel_for(n, opts.threads, [&](int i) {
    Rng rng = base_rng.substream(0xE57E9, static_cast<std::uint64_t>(rung),
                                 static_cast<std::uint64_t>(iteration),
                                 static_cast<std::uint64_t>(i));
    const Vector y = data.values.row(i).transpose();
    const int jbar = detail::skew_dim(data.items, y);
    try {
      if (jbar <= opts.sun.exact_dim_limit) {
        const SunParams post = mixed_sun_params(params, data.items, y, prior_mean, prior_cov);
        SunSampleReport rep;
        result.draws.per_obs[static_cast<size_t>(i)] = sample_sun(post, m_samples, rng, &rep, opts.sun);
        if (rep.mcmc_fallback) fallback_flags[static_cast<size_t>(i)] = 1;
      } else {
        result.draws.per_obs[static_cast<size_t>(i)] =
            shared.sample(y, m_samples, rng, opts.sun.gibbs_burn_in);
        fallback_flags[static_cast<size_t>(i)] = 1;
      }
    } catch (const std::exception& e) {
      throw NumericError("e-step failed at observation " + std::to_string(i) + ": " + e.what());
    }
  });

  Matrix pooled = Matrix::Zero(k, k);
  for (int i = 0; i < n; ++i) {
    const Matrix& block = result.draws.per_obs[static_cast<size_t>(i)];
    pooled.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose(), 1.0);
  }
  pooled = pooled.selfadjointView<Eigen::Lower>();
  pooled /= static_cast<double>(n) * m_samples;
  result.draws.pooled_second_moment = pooled;
  for (char f : fallback_flags) result.draws.mcmc_fallback |= (f != 0);

  result.gamma_expect = gamma_expectation(params.loading, params.ibp_weights, lambda1, lambda0);
  return result;
}

struct MStepResult {
  ModelParams params;
  Matrix gamma_expect;  // columns permuted consistently with the loadings
  std::vector<std::string> warnings;
};

// M-step: per-item penalized fits, optional rotation by the expansion factor,
// column reordering by decreasing inclusion mass, and the isotonic weight
// update. Pass identity for `rotation_chol` to run the vanilla EM update.
inline MStepResult m_step(const LatentDraws& draws, const ResponseMatrix& data,
                          const Matrix& gamma_expect, const PriorConfig& prior, double lambda0,
                          const ModelParams& current, const Matrix& rotation_chol,
                          const EmOptions& opts = EmOptions()) {
  const int n = data.n_obs();
  const int j_items = data.n_items();
  const int k = current.k_star();
  const int m = draws.m_samples;
  const Matrix x = draws.stacked();
  const long rows = x.rows();

  MStepResult out;
  out.params = current;
  std::vector<std::string> item_warnings(static_cast<size_t>(j_items));

  SolverOptions sopts;
  sopts.loglik_scale = 1.0 / static_cast<double>(m);

  parallel_for(j_items, opts.threads, [&](int j) {
    Vector y_rep(rows);
    for (int i = 0; i < n; ++i)
      y_rep.segment(static_cast<long>(i) * m, m).setConstant(data.values(i, j));
    const PenaltyWeights w = penalty_weights(gamma_expect.row(j), prior.lambda1, lambda0);
    const ItemKind& kind = data.kind(j);
    if (kind.type == ItemType::Binary) {
      const ProbitFit fit = fit_penalized_probit(x, y_rep, w, current.loading.row(j).transpose(),
                                                 current.intercept(j), sopts);
      out.params.loading.row(j) = fit.beta.transpose();
      out.params.intercepts[static_cast<size_t>(j)] = Vector::Constant(1, fit.intercept);
      if (!fit.converged)
        item_warnings[static_cast<size_t>(j)] = "probit solver hit iteration cap";
    } else if (kind.type == ItemType::Ordinal) {
      std::vector<int> y_levels(static_cast<size_t>(rows));
      for (long r = 0; r < rows; ++r) y_levels[static_cast<size_t>(r)] = static_cast<int>(y_rep(r));
      const OrderedProbitFit fit = fit_penalized_ordered_probit(
          x, y_levels, kind.levels - 1, w, current.loading.row(j).transpose(),
          current.intercepts[static_cast<size_t>(j)], sopts);
      out.params.loading.row(j) = fit.beta.transpose();
      out.params.intercepts[static_cast<size_t>(j)] = fit.thresholds;
      if (!fit.converged)
        item_warnings[static_cast<size_t>(j)] = "ordered probit solver hit iteration cap";
      else if (fit.gap_floored)
        item_warnings[static_cast<size_t>(j)] = "ordinal thresholds at gap floor";
    } else {
      const Vector beta = fit_penalized_linear(x, y_rep, w.coef, current.resid_var(j),
                                               current.loading.row(j).transpose(), sopts);
      out.params.loading.row(j) = beta.transpose();
      out.params.resid_var(j) = update_sigma(x, y_rep, beta, n, sopts.loglik_scale,
                                             prior.ig_shape, prior.ig_rate);
      out.params.intercepts[static_cast<size_t>(j)] = Vector::Zero(1);
    }
  });
  for (auto& wmsg : item_warnings)
    if (!wmsg.empty()) out.warnings.push_back(wmsg);

  out.params.loading = out.params.loading * rotation_chol;

  // Binary-order sorting: stable column reordering by decreasing inclusion
  // mass, applied consistently before the isotonic projection. The reorder
  // fires only when the current order is violated by a clear margin, so
  // Monte-Carlo noise in near-tied columns cannot flip them back and forth
  // between iterations.
  out.gamma_expect = gamma_expect;
  std::vector<int> order(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) order[static_cast<size_t>(c)] = c;
  Vector colsum = gamma_expect.colwise().sum();
  const double reorder_margin = 2.0;
  bool violated = false;
  for (int c = 0; c + 1 < k; ++c)
    violated |= (colsum(c) + reorder_margin < colsum(c + 1));
  bool nontrivial = false;
  if (violated) {
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return colsum(a) > colsum(b); });
    for (int c = 0; c < k; ++c) nontrivial |= (order[static_cast<size_t>(c)] != c);
  }
  if (nontrivial) {
    Matrix b_perm(j_items, k), g_perm(j_items, k);
    for (int c = 0; c < k; ++c) {
      b_perm.col(c) = out.params.loading.col(order[static_cast<size_t>(c)]);
      g_perm.col(c) = gamma_expect.col(order[static_cast<size_t>(c)]);
    }
    out.params.loading = std::move(b_perm);
    out.gamma_expect = std::move(g_perm);
  }
  out.params.ibp_weights = optimize_ibp_weights(out.gamma_expect, prior.alpha);
  return out;
}

// Default initialisation: small uniform loadings, zero intercepts (ordinal
// thresholds at tiny increasing offsets), inclusion weights at the IBP prior
// mean c_k = (alpha/(alpha+1))^k, and sample variances for the continuous
// residuals. Starting the weights high (e.g. 0.9^k) locks the slab
// expectations near one during the dense early rungs and the spike never
// engages afterwards.
inline ModelParams default_init(const ResponseMatrix& data, const PriorConfig& prior,
                                const Rng& base_rng) {
  const int j_items = data.n_items();
  const int k = prior.k_star;
  ModelParams params;
  Rng rng = base_rng.substream(0x1717);
  params.loading.resize(j_items, k);
  for (int j = 0; j < j_items; ++j)
    for (int c = 0; c < k; ++c) params.loading(j, c) = rng.uniform(-0.02, 0.02);
  params.intercepts.resize(static_cast<size_t>(j_items));
  params.resid_var = Vector::Ones(j_items);
  for (int j = 0; j < j_items; ++j) {
    const ItemKind& kind = data.kind(j);
    if (kind.type == ItemType::Ordinal) {
      Vector d(kind.levels - 1);
      for (int l = 0; l < d.size(); ++l) d(l) = 1e-3 * l;
      params.intercepts[static_cast<size_t>(j)] = d;
    } else {
      params.intercepts[static_cast<size_t>(j)] = Vector::Zero(1);
    }
    if (kind.type == ItemType::Continuous) {
      const double mean = data.values.col(j).mean();
      const double var =
          (data.values.col(j).array() - mean).square().sum() / std::max(1, data.n_obs() - 1);
      params.resid_var(j) = std::max(var, 1e-6);
    }
  }
  params.ibp_weights.resize(k);
  const double stick_mean = prior.alpha / (prior.alpha + 1.0);
  for (int c = 0; c < k; ++c)
    params.ibp_weights(c) =
        std::min(std::max(std::pow(stick_mean, c + 1), kIbpWeightFloor), 1.0 - kIbpWeightFloor);
  return params;
}

// One ladder rung of the (PX)L-EM: iterate E / M / rotation until the
// max-abs loading change drops below `tol` or `max_iter` is reached.
inline FitResult run_pxl_em(const ResponseMatrix& data, const PriorConfig& prior,
                            const ModelParams& init, double lambda0, double tol, int max_iter,
                            const Rng& base_rng, bool rotate, int rung = 0,
                            const EmOptions& opts = EmOptions(), int schedule_offset = 0) {
  prior.check();
  if (tol <= 0.0) throw ConfigError("run_pxl_em: tolerance must be positive");
  if (max_iter < 1) throw ConfigError("run_pxl_em: max_iter must be positive");

  FitResult result;
  result.params = init;
  RungRecord record;
  record.lambda0 = lambda0;
  const auto t_start = std::chrono::steady_clock::now();

  for (int iter = 0; iter < max_iter; ++iter) {
    const int m = prior.mc_samples(schedule_offset + iter);
    EStepResult e = e_step(data, result.params, m, prior.lambda1, lambda0, base_rng, rung, iter, opts);
    record.mcmc_estep |= e.draws.mcmc_fallback;

    Matrix rotation = Matrix::Identity(result.params.k_star(), result.params.k_star());
    if (rotate) rotation = px_rotation_from_moment(e.draws.pooled_second_moment).chol_lower;

    MStepResult mres = m_step(e.draws, data, e.gamma_expect, prior, lambda0, result.params,
                              rotation, opts);
    for (const auto& wmsg : mres.warnings) result.warnings.push_back(wmsg);

    const double change = (mres.params.loading - result.params.loading).cwiseAbs().maxCoeff();
    result.params = std::move(mres.params);
    result.gamma_expect = std::move(mres.gamma_expect);
    record.iterations = iter + 1;
    record.max_abs_change = change;
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (opts.progress)
      opts.progress({rung, lambda0, iter, m, change, record.seconds});
    if (change < tol) {
      record.converged = true;
      break;
    }
  }

  result.gamma_expect =
      gamma_expectation(result.params.loading, result.params.ibp_weights, prior.lambda1, lambda0);
  if (lambda0 > prior.lambda1) {
    result.effective_dim =
        effective_dimension(result.params.loading, result.params.ibp_weights, lambda0, prior.lambda1);
  } else {
    // lambda0 == lambda1: no spike/slab separation, count nonzero columns
    result.effective_dim = 0;
    for (int c = 0; c < result.params.loading.cols(); ++c)
      if (result.params.loading.col(c).cwiseAbs().maxCoeff() > 0.0) result.effective_dim = c + 1;
  }
  record.effective_dim = result.effective_dim;
  result.trace.push_back(record);
  return result;
}

struct FitPath {
  std::vector<FitResult> rungs;
  FitResult final;
  int stabilized_at = -1;  // first rung whose solution matched the previous one within tol
};

// Dynamic posterior exploration: run the EM along the increasing lambda0
// ladder, warm-starting each rung from the previous solution.
inline FitPath dynamic_posterior_exploration(const ResponseMatrix& data, const PriorConfig& prior,
                                             const LadderConfig& ladder, const Rng& base_rng,
                                             bool rotate = true, const EmOptions& opts = EmOptions(),
                                             const ModelParams* init = nullptr) {
  PriorConfig rung_prior = prior;
  rung_prior.lambda1 = ladder.lambda1;
  rung_prior.lambda0_ladder = ladder.lambda0;
  rung_prior.check();

  FitPath path;
  ModelParams params = init ? *init : default_init(data, rung_prior, base_rng);
  Matrix prev_loading;
  double accumulated = 0.0;
  int schedule_offset = 0;  // MC schedule grows across the whole ladder
  for (size_t r = 0; r < ladder.lambda0.size(); ++r) {
    FitResult res = run_pxl_em(data, rung_prior, params, ladder.lambda0[r], ladder.tol,
                               ladder.max_iter, base_rng, rotate, static_cast<int>(r), opts,
                               schedule_offset);
    schedule_offset += res.trace.back().iterations;
    params = res.params;
    accumulated += res.trace.back().seconds;
    res.trace.back().seconds = accumulated;
    if (r > 0 && path.stabilized_at < 0) {
      const double drift = (params.loading - prev_loading).cwiseAbs().maxCoeff();
      if (drift < ladder.tol) path.stabilized_at = static_cast<int>(r);
    }
    prev_loading = params.loading;
    path.rungs.push_back(res);
  }

  path.final = path.rungs.back();
  path.final.trace.clear();
  for (const auto& rung : path.rungs) path.final.trace.push_back(rung.trace.back());
  for (const auto& rung : path.rungs)
    for (const auto& wmsg : rung.warnings) path.final.warnings.push_back(wmsg);
  return path;
}

}  // namespace mirt
