// Acceptance suite: one pass/fail line per criterion.
//
//  1  IBP benchmark at full scale (N=250, J=350, 5 factors, K*=10)
//  2  reduced smoke benchmark (J=100, 3 factors, K*=6)
//  3  overshooting recovery on the overlapping-pairs design
//  4  consistency trend in N for the full-scale design
//  5  SUN sampler vs rejection-sampling oracle
//  6  TMVN closed-form analytics
//  7  M-step solver oracles
//  8  Polya-Gamma identity and Geweke joint-distribution test
//  9  CDF-trick two-path identity
// 10  mixed-type reduction and graded-response marginals
//
// Usage: acceptance [--criterion N]... [--threads T] [--seed S]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "mirt/em.hpp"
#include "mirt/gibbs.hpp"
#include "mirt/metrics.hpp"
#include "mirt/synth.hpp"
#include "mirt/threads.hpp"

namespace {

using namespace mirt;

int g_threads = default_thread_count();
std::uint64_t g_fit_seed = 1;

constexpr std::uint64_t kIbpTruthSeed = 20240614;   // full-scale IBP design draw
constexpr std::uint64_t kSmokeTruthSeed = 20240307; // reduced benchmark draw

struct Check {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? " ok" : " FAILED");
  }
};

struct BenchmarkOutcome {
  double loading_mse = 0.0;
  double intercept_mse = 0.0;
  double fdr = 0.0;
  double fnr = 0.0;
  int effective_dim = 0;
  int nonzero_columns = 0;
  double seconds = 0.0;
};

BenchmarkOutcome run_benchmark(const SynthDataset& ds, int k_star, double lambda1,
                               const std::vector<double>& ladder_rungs, double tol) {
  PriorConfig prior;
  prior.lambda1 = lambda1;
  prior.lambda0_ladder = ladder_rungs;
  prior.alpha = 2.0;
  prior.k_star = k_star;

  LadderConfig ladder;
  ladder.lambda1 = lambda1;
  ladder.lambda0 = ladder_rungs;
  ladder.tol = tol;
  ladder.max_iter = 100;

  EmOptions opts;
  opts.threads = g_threads;

  Rng rng(g_fit_seed);
  const auto t0 = std::chrono::steady_clock::now();
  const FitPath path = dynamic_posterior_exploration(ds.data, prior, ladder, rng, true, opts);
  BenchmarkOutcome out;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const Matrix& b = path.final.params.loading;
  const Alignment align = align_loadings(b, ds.loading_true);
  const FdrFnr rates = fdr_fnr(b, ds.loading_true, align, 0.0);
  out.loading_mse = loading_mse(b, ds.loading_true, align);
  out.intercept_mse = intercept_mse(path.final.params.intercepts, ds.intercepts_true);
  out.fdr = rates.fdr;
  out.fnr = rates.fnr;
  out.effective_dim = path.final.effective_dim;
  for (int c = 0; c < b.cols(); ++c)
    if (b.col(c).cwiseAbs().maxCoeff() > 0.0) ++out.nonzero_columns;
  return out;
}

SynthDataset ibp_dataset(int n_obs, int j_items, int keep_k, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_obs = n_obs;
  spec.n_items = j_items;
  spec.design = SynthDesign::IbpDraw;
  spec.alpha = 2.0;
  spec.keep_k = keep_k;
  spec.seed = seed;
  return generate_synthetic(spec);
}

Check criterion_1() {
  Check check;
  const SynthDataset ds = ibp_dataset(250, 350, 5, kIbpTruthSeed);
  const BenchmarkOutcome out =
      run_benchmark(ds, 10, 0.5, {0.5, 1, 3, 6, 10, 20, 30, 40}, 0.06);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "loading_mse=%.4f intercept_mse=%.4f fdr=%.4f fnr=%.4f dim=%d (%.0fs)",
                out.loading_mse, out.intercept_mse, out.fdr, out.fnr, out.effective_dim,
                out.seconds);
  check.detail = buf;
  check.require(out.loading_mse <= 0.02, "loading MSE <= 0.02");
  check.require(out.intercept_mse <= 0.04, "intercept MSE <= 0.04");
  check.require(out.fnr == 0.0, "FNR == 0");
  check.require(out.fdr <= 0.05, "FDR <= 0.05");
  check.require(out.effective_dim == 5, "effective dimension == 5");
  return check;
}

Check criterion_2() {
  Check check;
  const SynthDataset ds = ibp_dataset(250, 100, 3, kSmokeTruthSeed);
  const BenchmarkOutcome out =
      run_benchmark(ds, 6, 0.5, {0.5, 1, 3, 6, 10, 20, 30, 40}, 0.06);
  char buf[120];
  std::snprintf(buf, sizeof(buf), "dim=%d fnr=%.4f (%.0fs)", out.effective_dim, out.fnr,
                out.seconds);
  check.detail = buf;
  check.require(out.effective_dim == 3, "effective dimension == 3");
  check.require(out.fnr == 0.0, "FNR == 0");
  check.require(out.seconds <= 600.0, "runtime <= 10 min");
  return check;
}

Check criterion_3() {
  Check check;
  SynthSpec spec;
  spec.n_obs = 150;
  spec.n_items = 200;  // N < J as in the motivating design
  spec.design = SynthDesign::OverlapPairs;
  spec.k_factors = 4;
  spec.pair_fraction = 0.5;
  spec.seed = 4;
  const SynthDataset ds = generate_synthetic(spec);
  const BenchmarkOutcome out =
      run_benchmark(ds, 10, 0.5, {0.5, 1, 3, 6, 10, 20, 30, 40}, 0.06);
  char buf[120];
  std::snprintf(buf, sizeof(buf), "nonzero_cols=%d fnr=%.4f (%.0fs)", out.nonzero_columns,
                out.fnr, out.seconds);
  check.detail = buf;
  check.require(out.nonzero_columns == 4, "exactly 4 nonzero columns");
  check.require(out.fnr == 0.0, "FNR == 0 on the pair pattern");
  return check;
}

Check criterion_4() {
  Check check;
  double prev = kPosInf;
  std::string mses;
  for (int n : {100, 250, 1000}) {
    const SynthDataset ds = ibp_dataset(n, 350, 5, kIbpTruthSeed);
    const BenchmarkOutcome out =
        run_benchmark(ds, 10, 0.5, {0.5, 1, 3, 6, 10, 20, 30, 40}, 0.06);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "N=%d mse=%.5f ", n, out.loading_mse);
    mses += buf;
    check.require(out.loading_mse < prev, "MSE decreases at N=" + std::to_string(n));
    prev = out.loading_mse;
  }
  check.detail = mses + "| " + check.detail;
  return check;
}

Check criterion_5() {
  Check check;
  const auto t0 = std::chrono::steady_clock::now();
  Rng instance_rng(505);
  int failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(instance_rng.uniform(0, 2));  // K <= 2
    const int j = 1 + static_cast<int>(instance_rng.uniform(0, 3));  // J <= 3
    Matrix loading(j, k);
    Vector intercept(j), y(j);
    for (int r = 0; r < j; ++r) {
      intercept(r) = instance_rng.uniform(-0.8, 0.8);
      y(r) = instance_rng.bernoulli(0.5) ? 1.0 : 0.0;
      for (int c = 0; c < k; ++c) loading(r, c) = instance_rng.uniform(-1.2, 1.2);
    }
    const SunParams post =
        binary_sun_params(loading, intercept, y, Vector::Zero(k), Matrix::Identity(k, k));
    Rng srng(700 + trial);
    const int m = 100000;
    const Matrix draws = sample_sun(post, m, srng);
    const Vector mean = draws.colwise().mean();
    const Matrix centered = draws.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / m;

    // rejection oracle
    Rng orng(900 + trial);
    Vector osum = Vector::Zero(k);
    Matrix osum2 = Matrix::Zero(k, k);
    long kept = 0;
    const long tries = 3000000;
    std::vector<Vector> kept_draws;
    for (long t = 0; t < tries; ++t) {
      Vector theta(k);
      for (int c = 0; c < k; ++c) theta(c) = orng.normal();
      double prob = 1.0;
      for (int r = 0; r < j; ++r)
        prob *= normal_cdf((2.0 * y(r) - 1.0) * (loading.row(r).dot(theta) + intercept(r)));
      if (orng.uniform() < prob) {
        osum += theta;
        osum2 += theta * theta.transpose();
        ++kept;
      }
    }
    const Vector omean = osum / kept;
    const Matrix ocov = osum2 / static_cast<double>(kept) - omean * omean.transpose();

    for (int c = 0; c < k; ++c) {
      const double se = std::sqrt(cov(c, c) / m + ocov(c, c) / kept);
      if (std::abs(mean(c) - omean(c)) > 4.0 * se) ++failures;
      for (int d = c; d < k; ++d) {
        // moment-of-products standard error for the covariance entries
        double m4 = 0.0;
        for (int r = 0; r < m; ++r) m4 += std::pow(centered(r, c) * centered(r, d), 2);
        m4 /= m;
        const double var_cov = std::max(m4 - cov(c, d) * cov(c, d), 1e-12);
        const double se_cov = std::sqrt(var_cov / m + 2.0 * var_cov / kept);
        if (std::abs(cov(c, d) - ocov(c, d)) > 4.0 * se_cov) ++failures;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  check.detail = "coordinate failures=" + std::to_string(failures) + " (" +
                 std::to_string(static_cast<int>(secs)) + "s)";
  check.require(failures == 0, "all coordinates within 4 SE");
  check.require(secs <= 120.0, "runtime <= 2 min");
  return check;
}

Check criterion_6() {
  Check check;
  const int n = 100000;
  {
    Rng rng(606);
    TruncationSpec spec{Matrix::Identity(1, 1), Vector::Zero(1)};
    const Matrix draws = sample_tmvn(spec, n, rng);
    const double mean = draws.col(0).mean();
    const double true_mean = std::sqrt(2.0 / M_PI);
    const double se = std::sqrt((1.0 - 2.0 / M_PI) / n);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "half-normal mean=%.5f (target %.5f)", mean, true_mean);
    check.detail = buf;
    check.require(std::abs(mean - true_mean) <= 4.0 * se, "half-normal mean within 4 SE");
  }
  {
    Rng rng(607);
    Matrix cov(2, 2);
    cov << 1.0, 0.5, 0.5, 1.0;
    const auto [p, se] = estimate_orthant_prob({cov, Vector::Zero(2)}, n, rng);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "; orthant=%.5f+-%.5f (target 1/3)", p, se);
    check.detail += buf;
    check.require(std::abs(p - 1.0 / 3.0) <= 4.0 * se, "orthant probability within 4 SE");
  }
  return check;
}

Check criterion_7() {
  Check check;
  // (a) penalized probit vs a 2-D grid on 10 fixed instances
  {
    double worst = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
      Rng rng(710 + inst);
      const int n = 50;
      Matrix x(n, 1);
      Vector y(n);
      const double beta_true = -1.5 + 0.35 * inst;
      for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        y(i) = rng.uniform() < normal_cdf(beta_true * x(i, 0) + 0.3) ? 1.0 : 0.0;
      }
      PenaltyWeights w;
      w.coef = Vector::Constant(1, 0.7);
      w.intercept = 0.5;
      const ProbitFit fit = fit_penalized_probit(x, y, w, Vector::Zero(1), 0.0);
      auto obj = [&](double b, double d) {
        double ll = 0.0;
        for (int i = 0; i < n; ++i)
          ll += log_normal_cdf((2.0 * y(i) - 1.0) * (x(i, 0) * b + d));
        return ll - 0.7 * std::abs(b) - 0.5 * std::abs(d);
      };
      double best_b = 0.0, best_d = 0.0, best = -1e300;
      for (double b = -3.0; b <= 3.0001; b += 0.01)
        for (double d = -3.0; d <= 3.0001; d += 0.01) {
          const double o = obj(b, d);
          if (o > best) {
            best = o;
            best_b = b;
            best_d = d;
          }
        }
      // refine so the grid oracle is finer than the comparison tolerance
      const double cb = best_b, cd = best_d;
      for (double b = cb - 0.012; b <= cb + 0.012; b += 1e-4)
        for (double d = cd - 0.012; d <= cd + 0.012; d += 1e-4) {
          const double o = obj(b, d);
          if (o > best) {
            best = o;
            best_b = b;
            best_d = d;
          }
        }
      worst = std::max({worst, std::abs(fit.beta(0) - best_b), std::abs(fit.intercept - best_d)});
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "probit-vs-grid max err=%.2e", worst);
    check.detail = buf;
    check.require(worst <= 1e-3, "probit within 1e-3 of grid");
  }
  // (b) ordered-probit analytic gradient vs central finite differences
  {
    double worst = 0.0;
    for (int inst = 0; inst < 5; ++inst) {
      Rng rng(720 + inst);
      const int n = 60;
      Matrix x(n, 2);
      std::vector<int> y(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        y[static_cast<size_t>(i)] = static_cast<int>(rng.uniform(0, 3));
      }
      const Vector beta = (Vector(2) << 0.3 + 0.1 * inst, -0.4).finished();
      const Vector thr = (Vector(2) << -0.5, 0.6).finished();
      const auto pass = detail::ordinal_pass(x, y, beta, thr, true);
      const double h = 1e-5;
      for (int l = 0; l < 2; ++l) {
        Vector tp = thr, tm = thr;
        tp(l) += h;
        tm(l) -= h;
        const double fd = (detail::ordinal_pass(x, y, beta, tp, false).loglik -
                           detail::ordinal_pass(x, y, beta, tm, false).loglik) /
                          (2.0 * h);
        worst = std::max(worst, std::abs(pass.grad_d(l) - fd));
      }
      for (int c = 0; c < 2; ++c) {
        Vector bp = beta, bm = beta;
        bp(c) += h;
        bm(c) -= h;
        const double fd = (detail::ordinal_pass(x, y, bp, thr, false).loglik -
                           detail::ordinal_pass(x, y, bm, thr, false).loglik) /
                          (2.0 * h);
        double analytic = 0.0;
        for (int i = 0; i < n; ++i) analytic += pass.u(i) * x(i, c);
        worst = std::max(worst, std::abs(analytic - fd));
      }
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "; ordinal-grad max err=%.2e", worst);
    check.detail += buf;
    check.require(worst < 1e-5, "ordered-probit gradient vs finite differences < 1e-5");
  }
  // (c) isotonic weight program beats every feasible grid point
  {
    bool all_ok = true;
    Rng rng(730);
    auto objective = [](const Matrix& gamma, double alpha, const Vector& c) {
      double obj = 0.0;
      const int k = static_cast<int>(c.size());
      for (int col = 0; col < k; ++col) {
        const double a = gamma.col(col).sum();
        obj += a * std::log(c(col)) + (gamma.rows() - a) * std::log1p(-c(col));
      }
      return obj + (alpha - 1.0) * std::log(c(k - 1));
    };
    for (int inst = 0; inst < 4; ++inst) {
      const int k = 2 + inst % 2;
      Matrix gamma(8, k);
      for (int j = 0; j < 8; ++j)
        for (int c = 0; c < k; ++c) gamma(j, c) = rng.uniform();
      const double alpha = 0.7 + rng.uniform();
      const Vector opt = optimize_ibp_weights(gamma, alpha);
      const double best_opt = objective(gamma, alpha, opt);
      for (double a = 0.01; a < 1.0; a += 0.01)
        for (double b = 0.01; b <= a + 1e-12; b += 0.01) {
          if (k == 2) {
            if (objective(gamma, alpha, (Vector(2) << a, b).finished()) > best_opt + 1e-9)
              all_ok = false;
          } else {
            for (double c3 = 0.01; c3 <= b + 1e-12; c3 += 0.01)
              if (objective(gamma, alpha, (Vector(3) << a, b, c3).finished()) > best_opt + 1e-9)
                all_ok = false;
          }
        }
    }
    check.detail += "; pava-vs-grid";
    check.require(all_ok, "PAVA optimum beats 0.01 grid");
  }
  // (d) rotation Cholesky identity
  {
    Rng rng(740);
    Matrix samples(400, 3);
    for (int i = 0; i < 400; ++i)
      for (int c = 0; c < 3; ++c) samples(i, c) = rng.normal();
    const PxRotation rot = px_rotation(samples);
    const double gap =
        (rot.chol_lower * rot.chol_lower.transpose() - rot.second_moment).cwiseAbs().maxCoeff();
    char buf[48];
    std::snprintf(buf, sizeof(buf), "; chol gap=%.2e", gap);
    check.detail += buf;
    check.require(gap < 1e-10, "px rotation Cholesky identity");
  }
  return check;
}

Check criterion_8() {
  Check check;
  // Polya-Gamma mean identity
  {
    Rng rng(808);
    const int n = 100000;
    double worst_z = 0.0;
    for (double c : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      double sum = 0.0, sumsq = 0.0;
      for (int i = 0; i < n; ++i) {
        const double x = sample_pg(c, rng);
        sum += x;
        sumsq += x * x;
      }
      const double mean = sum / n;
      const double want = c == 0.0 ? 0.25 : std::tanh(c / 2.0) / (2.0 * c);
      const double se = std::sqrt((sumsq / n - mean * mean) / n);
      worst_z = std::max(worst_z, std::abs(mean - want) / se);
    }
    char buf[48];
    std::snprintf(buf, sizeof(buf), "pg worst |z|=%.2f", worst_z);
    check.detail = buf;
    check.require(worst_z <= 4.0, "PG mean identity within 4 SE");
  }
  // Geweke joint-distribution test on the 4-obs, 2-item, K=1 toy
  {
    const int n = 4, j = 2, k = 1;
    GibbsHyper hyper;
    const int mc_draws = 80000;
    const int sc_sweeps = 80000;
    auto stats = [&](const GibbsState& s) {
      Vector out(6);
      out(0) = std::tanh(s.loading(0, 0));
      out(1) = std::tanh(s.loading(1, 0));
      out(2) = normal_cdf(s.intercept(0));
      out(3) = normal_cdf(s.intercept(1));
      out(4) = (s.gamma_ss(0, 0) == 1.0 ? 1.0 : 0.0) + (s.gamma_ss(1, 0) == 1.0 ? 1.0 : 0.0);
      out(5) = std::tanh(s.theta(0, 0));
      return out;
    };
    Rng mc_rng(809);
    Vector mc_sum = Vector::Zero(6), mc_sumsq = Vector::Zero(6);
    for (int t = 0; t < mc_draws; ++t) {
      const Vector g = stats(gibbs_prior_draw(n, j, k, hyper, mc_rng));
      mc_sum += g;
      mc_sumsq += g.cwiseProduct(g);
    }
    const Vector mc_mean = mc_sum / mc_draws;
    const Vector mc_var = mc_sumsq / mc_draws - mc_mean.cwiseProduct(mc_mean);

    Rng sc_rng(810);
    GibbsState s = gibbs_prior_draw(n, j, k, hyper, sc_rng);
    const int n_batches = 50;
    const int batch = sc_sweeps / n_batches;
    Matrix batch_means = Matrix::Zero(n_batches, 6);
    Vector sc_sum = Vector::Zero(6);
    for (int t = 0; t < sc_sweeps; ++t) {
      const Matrix y = gibbs_simulate_y(s, sc_rng);
      gibbs_sweep(s, y, hyper, sc_rng);
      const Vector g = stats(s);
      sc_sum += g;
      batch_means.row(t / batch) += g.transpose() / batch;
    }
    const Vector sc_mean = sc_sum / sc_sweeps;
    double worst_z = 0.0;
    for (int c = 0; c < 6; ++c) {
      double bv = 0.0;
      for (int b = 0; b < n_batches; ++b) {
        const double d = batch_means(b, c) - sc_mean(c);
        bv += d * d;
      }
      const double sc_se2 = bv / (n_batches * (n_batches - 1.0));
      const double mc_se2 = mc_var(c) / mc_draws;
      worst_z = std::max(worst_z, std::abs(sc_mean(c) - mc_mean(c)) / std::sqrt(sc_se2 + mc_se2));
    }
    char buf[48];
    std::snprintf(buf, sizeof(buf), "; geweke worst |z|=%.2f", worst_z);
    check.detail += buf;
    check.require(worst_z <= 4.0, "Geweke statistics within 4 SE");
  }
  return check;
}

Check criterion_9() {
  Check check;
  double worst = 0.0;
  int points = 0;
  for (int i = 0; i < 14; ++i) {
    for (int j = i; j < 14; ++j) {
      const double a = -4.0 + 8.0 * i / 13.0;
      const double b = -4.0 + 8.0 * j / 13.0;
      worst = std::max(worst, std::abs(cdf_difference(a, b) - cdf_difference_bvn(a, b)));
      ++points;
    }
  }
  char buf[80];
  std::snprintf(buf, sizeof(buf), "max two-path gap=%.2e over %d grid points", worst, points);
  check.detail = buf;
  check.require(worst < 1e-8, "two evaluation paths agree within 1e-8");
  return check;
}

Check criterion_10() {
  Check check;
  // byte-equivalence of the mixed constructor on all-binary input
  {
    Rng rng(1010);
    bool all_equal = true;
    for (int trial = 0; trial < 10; ++trial) {
      const int j = 1 + trial % 4;
      const int k = 1 + trial % 3;
      ModelParams params;
      params.loading.resize(j, k);
      params.intercepts.resize(static_cast<size_t>(j));
      params.resid_var = Vector::Ones(j);
      params.ibp_weights = Vector::Constant(k, 0.5);
      Vector d(j), y(j);
      std::vector<ItemSpec> items;
      for (int r = 0; r < j; ++r) {
        for (int c = 0; c < k; ++c) params.loading(r, c) = rng.uniform(-1.5, 1.5);
        d(r) = rng.uniform(-1, 1);
        params.intercepts[static_cast<size_t>(r)] = Vector::Constant(1, d(r));
        y(r) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        items.push_back({"b", ItemKind::binary()});
      }
      const SunParams mixed =
          mixed_sun_params(params, items, y, Vector::Zero(k), Matrix::Identity(k, k));
      const SunParams direct =
          binary_sun_params(params.loading, d, y, Vector::Zero(k), Matrix::Identity(k, k));
      all_equal &= (mixed.delta - direct.delta).cwiseAbs().maxCoeff() == 0.0;
      all_equal &= (mixed.gamma_vec - direct.gamma_vec).cwiseAbs().maxCoeff() == 0.0;
      all_equal &= (mixed.gamma_mat - direct.gamma_mat).cwiseAbs().maxCoeff() == 0.0;
      all_equal &= (mixed.xi - direct.xi).cwiseAbs().maxCoeff() == 0.0;
      all_equal &= (mixed.omega_mat - direct.omega_mat).cwiseAbs().maxCoeff() == 0.0;
    }
    check.detail = "mixed/binary byte-equality";
    check.require(all_equal, "byte-equivalent posterior parameters");
  }
  // graded-response simulation marginals
  {
    const int n = 100000;
    Matrix loading = Matrix::Zero(1, 1);
    std::vector<Vector> intercepts = {(Vector(2) << -1.0, 1.0).finished()};
    std::vector<ItemKind> kinds = {ItemKind::ordinal(3)};
    Rng rng(1011);
    const ResponseMatrix data =
        simulate_responses(loading, intercepts, Vector::Ones(1), kinds, n, rng);
    double freq[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) freq[static_cast<int>(data.values(i, 0))] += 1.0 / n;
    const double want[3] = {normal_cdf(-1.0), normal_cdf(1.0) - normal_cdf(-1.0),
                            normal_sf(1.0)};
    double worst_z = 0.0;
    for (int l = 0; l < 3; ++l) {
      const double se = std::sqrt(want[l] * (1.0 - want[l]) / n);
      worst_z = std::max(worst_z, std::abs(freq[l] - want[l]) / se);
    }
    char buf[48];
    std::snprintf(buf, sizeof(buf), "; marginals worst |z|=%.2f", worst_z);
    check.detail += buf;
    check.require(worst_z <= 4.0, "graded marginals within 4 SE");
  }
  return check;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--criterion") == 0 && a + 1 < argc) {
      selected.push_back(std::atoi(argv[++a]));
    } else if (std::strcmp(argv[a], "--threads") == 0 && a + 1 < argc) {
      g_threads = std::atoi(argv[++a]);
    } else if (std::strcmp(argv[a], "--seed") == 0 && a + 1 < argc) {
      g_fit_seed = std::strtoull(argv[++a], nullptr, 10);
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N]... [--threads T] [--seed S]\n");
      return 2;
    }
  }
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  const std::function<Check()> criteria[10] = {
      criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
      criterion_6, criterion_7, criterion_8, criterion_9, criterion_10};

  int failures = 0;
  for (int id : selected) {
    if (id < 1 || id > 10) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Check check;
    try {
      check = criteria[id - 1]();
    } catch (const std::exception& e) {
      check.pass = false;
      check.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%.1fs)\n", check.pass ? "PASS" : "FAIL", id,
                check.detail.c_str(), secs);
    std::fflush(stdout);
    if (!check.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
