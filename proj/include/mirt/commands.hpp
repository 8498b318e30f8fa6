#pragma once

// CLI command implementations. Each command takes a fully-resolved JSON
// config, writes its artifacts into `out_dir`, and echoes the resolved
// config (with the seed) to manifest.json so a run can be reproduced
// bit-identically from its manifest.

#include <filesystem>
#include <string>
#include <vector>

#include "mirt/common.hpp"
#include "mirt/em.hpp"
#include "mirt/gibbs.hpp"
#include "mirt/io.hpp"
#include "mirt/metrics.hpp"
#include "mirt/model.hpp"
#include "mirt/svg.hpp"
#include "mirt/synth.hpp"
#include "mirt/threads.hpp"

namespace mirt {

namespace detail {

inline std::string out_path(const Json& config, const std::string& file) {
  const std::string dir = config.at("out_dir").get<std::string>();
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / file).string();
}

template <typename T>
inline T get_or(const Json& config, const std::string& key, T fallback) {
  if (!config.contains(key)) return fallback;
  try {
    return config.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

inline std::vector<ItemKind> kinds_from_config(const Json& config, int n_items) {
  std::vector<ItemKind> kinds;
  if (!config.contains("kinds")) {
    kinds.assign(static_cast<size_t>(n_items), ItemKind::binary());
    return kinds;
  }
  const Json& spec = config.at("kinds");
  if (spec.is_string()) {
    kinds.assign(static_cast<size_t>(n_items), parse_kind(spec.get<std::string>()));
    return kinds;
  }
  if (!spec.is_array() || static_cast<int>(spec.size()) != n_items)
    throw ConfigError("'kinds' must be a single kind string or an array of length n_items");
  for (const auto& entry : spec) kinds.push_back(parse_kind(entry.get<std::string>()));
  return kinds;
}

inline void write_manifest(const Json& config, const std::string& command) {
  Json manifest;
  manifest["command"] = command;
  manifest["config"] = config;
  write_json(out_path(config, "manifest.json"), manifest);
}

inline PriorConfig prior_from_config(const Json& config) {
  PriorConfig prior;
  prior.lambda1 = get_or(config, "lambda1", 0.5);
  prior.lambda0_ladder =
      get_or(config, "lambda0_ladder", std::vector<double>{0.5, 1, 3, 6, 10, 20, 30, 40});
  prior.alpha = get_or(config, "alpha", 2.0);
  prior.k_star = get_or(config, "k_star", 10);
  prior.mc_base = get_or(config, "mc_base", 50);
  prior.mc_step = get_or(config, "mc_step", 10);
  prior.mc_cap = get_or(config, "mc_cap", 400);
  prior.check();
  return prior;
}

inline Json metrics_json(const Matrix& b_est, const Matrix& b_true, double threshold) {
  const Alignment al = align_loadings(b_est, b_true);
  const FdrFnr rates = fdr_fnr(b_est, b_true, al, threshold);
  Json out;
  out["loading_mse"] = loading_mse(b_est, b_true, al);
  out["fdr"] = rates.fdr;
  out["fnr"] = rates.fnr;
  out["threshold"] = threshold;
  Json matched = Json::array();
  for (size_t t = 0; t < al.matched_est.size(); ++t) {
    matched.push_back({{"true_col", t},
                       {"est_col", al.matched_est[t]},
                       {"sign", al.sign[t]}});
  }
  out["alignment"] = matched;
  return out;
}

}  // namespace detail

// simulate: write a synthetic dataset plus its ground-truth manifest.
inline void cmd_simulate(const Json& config) {
  SynthSpec spec;
  spec.n_obs = detail::get_or(config, "n_obs", 250);
  spec.n_items = detail::get_or(config, "n_items", 350);
  spec.seed = detail::get_or<std::uint64_t>(config, "seed", 1);
  spec.magnitude = detail::get_or(config, "magnitude", 1.0);
  spec.intercept_sd = detail::get_or(config, "intercept_sd", 0.5);
  spec.resid_var = detail::get_or(config, "resid_var", 1.0);
  spec.kinds = detail::kinds_from_config(config, spec.n_items);

  const std::string design = detail::get_or<std::string>(config, "design", "ibp");
  if (design == "ibp") {
    spec.design = SynthDesign::IbpDraw;
    spec.alpha = detail::get_or(config, "alpha", 2.0);
    spec.keep_k = detail::get_or(config, "keep_k", 5);
  } else if (design == "overlap") {
    spec.design = SynthDesign::OverlapPairs;
    spec.k_factors = detail::get_or(config, "k_factors", 4);
    spec.pair_fraction = detail::get_or(config, "pair_fraction", 0.5);
  } else if (design == "explicit") {
    spec.design = SynthDesign::Explicit;
    spec.explicit_loading = read_matrix_csv(config.at("loading_csv").get<std::string>());
    if (config.contains("intercepts_csv"))
      spec.explicit_intercepts = read_intercepts_csv(config.at("intercepts_csv").get<std::string>());
    spec.n_items = static_cast<int>(spec.explicit_loading.rows());
  } else {
    throw ConfigError("unknown design '" + design + "' (expected ibp|overlap|explicit)");
  }

  const SynthDataset ds = generate_synthetic(spec);
  write_response_csv(detail::out_path(config, "responses.csv"), ds.data);
  write_matrix_csv(detail::out_path(config, "truth_loading.csv"), ds.loading_true, "f");
  write_intercepts_csv(detail::out_path(config, "truth_intercepts.csv"), ds.data,
                       ds.intercepts_true);
  write_matrix_csv(detail::out_path(config, "truth_pattern.csv"), ds.pattern, "f");

  Json truth;
  truth["seed"] = spec.seed;
  truth["design"] = design;
  truth["n_obs"] = spec.n_obs;
  truth["n_items"] = spec.n_items;
  truth["magnitude"] = spec.magnitude;
  truth["intercept_sd"] = spec.intercept_sd;
  truth["loading"] = "truth_loading.csv";
  truth["intercepts"] = "truth_intercepts.csv";
  truth["pattern"] = "truth_pattern.csv";
  write_json(detail::out_path(config, "truth_manifest.json"), truth);
  detail::write_manifest(config, "simulate");
}

// fit: PXL-EM with the dynamic posterior exploration ladder, plus artifacts.
inline void cmd_fit(const Json& config) {
  const ResponseMatrix data = read_response_csv(config.at("data").get<std::string>());
  const PriorConfig prior = detail::prior_from_config(config);

  LadderConfig ladder;
  ladder.lambda1 = prior.lambda1;
  ladder.lambda0 = prior.lambda0_ladder;
  ladder.tol = detail::get_or(config, "tol", 0.06);
  ladder.max_iter = detail::get_or(config, "max_iter", 100);

  EmOptions opts;
  opts.rotate = detail::get_or(config, "rotate", true);
  opts.threads = detail::get_or(config, "threads", default_thread_count());
  const bool verbose = detail::get_or(config, "verbose", false);
  if (verbose) {
    opts.progress = [](const ProgressInfo& p) {
      std::fprintf(stderr, "rung %d (lambda0=%g) iter %d M=%d change=%.5f %.1fs\n", p.rung,
                   p.lambda0, p.iteration, p.m_samples, p.max_abs_change, p.seconds_elapsed);
    };
  }

  const std::uint64_t seed = detail::get_or<std::uint64_t>(config, "seed", 1);
  Rng rng(seed);
  const FitPath path = dynamic_posterior_exploration(data, prior, ladder, rng, opts.rotate, opts);
  const FitResult& fit = path.final;

  write_matrix_csv(detail::out_path(config, "loading.csv"), fit.params.loading, "f");
  write_intercepts_csv(detail::out_path(config, "intercepts.csv"), data, fit.params.intercepts);
  write_matrix_csv(detail::out_path(config, "gamma_expect.csv"), fit.gamma_expect, "f");
  write_matrix_csv(detail::out_path(config, "ibp_weights.csv"),
                   fit.params.ibp_weights.transpose(), "c");
  write_matrix_csv(detail::out_path(config, "resid_var.csv"),
                   fit.params.resid_var.transpose(), "i");
  write_loading_heatmap(detail::out_path(config, "heatmap.svg"), fit.params.loading,
                        "estimated loadings");

  // Per-rung trace mirroring the benchmark table: accuracy metrics appear
  // when a ground-truth manifest is supplied.
  const bool have_truth = config.contains("truth_loading");
  Matrix b_true;
  std::vector<Vector> d_true;
  if (have_truth) {
    b_true = read_matrix_csv(config.at("truth_loading").get<std::string>());
    if (config.contains("truth_intercepts"))
      d_true = read_intercepts_csv(config.at("truth_intercepts").get<std::string>());
  }
  {
    std::ofstream trace(detail::out_path(config, "trace.csv"));
    trace << "lambda0,iterations,max_abs_change,converged,mcmc_estep,effective_dim,"
             "accumulated_seconds";
    if (have_truth) trace << ",loading_mse,intercept_mse,fdr,fnr";
    trace << "\n";
    for (size_t r = 0; r < path.rungs.size(); ++r) {
      const RungRecord& rec = path.final.trace[r];
      trace << format_double(rec.lambda0) << "," << rec.iterations << ","
            << format_double(rec.max_abs_change) << "," << (rec.converged ? 1 : 0) << ","
            << (rec.mcmc_estep ? 1 : 0) << "," << rec.effective_dim << ","
            << format_double(rec.seconds);
      if (have_truth) {
        const Matrix& b_rung = path.rungs[r].params.loading;
        const Alignment al = align_loadings(b_rung, b_true);
        const FdrFnr rates = fdr_fnr(b_rung, b_true, al, 0.0);
        const double imse =
            d_true.empty() ? 0.0 : intercept_mse(path.rungs[r].params.intercepts, d_true);
        trace << "," << format_double(loading_mse(b_rung, b_true, al)) << ","
              << format_double(imse) << "," << format_double(rates.fdr) << ","
              << format_double(rates.fnr);
      }
      trace << "\n";
    }
  }

  Json report;
  report["effective_dim"] = fit.effective_dim;
  report["seed"] = seed;
  report["stabilized_at_rung"] = path.stabilized_at;
  report["warnings"] = fit.warnings;
  report["mcmc_estep"] = fit.trace.back().mcmc_estep;
  write_json(detail::out_path(config, "fit_report.json"), report);

  if (have_truth) {
    Json metrics = detail::metrics_json(fit.params.loading, b_true, 0.0);
    if (!d_true.empty())
      metrics["intercept_mse"] = intercept_mse(fit.params.intercepts, d_true);
    if (detail::get_or(config, "reconstruction_mse", false)) {
      Rng rec_rng = rng.substream(0x4ec);
      metrics["reconstruction_mse"] =
          reconstruction_mse(fit.params, data, 100, rec_rng, opts.threads);
    }
    write_json(detail::out_path(config, "metrics.json"), metrics);
  }
  detail::write_manifest(config, "fit");
}

// gibbs: the comparison sampler, with chain dump and thresholded metrics.
inline void cmd_gibbs(const Json& config) {
  const ResponseMatrix data = read_response_csv(config.at("data").get<std::string>());
  for (int j = 0; j < data.n_items(); ++j)
    if (data.kind(j).type != ItemType::Binary)
      throw ConfigError("gibbs baseline handles binary items only");

  const int k = detail::get_or(config, "k", 10);
  const int iters = detail::get_or(config, "iters", 2000);
  const int burn_in = detail::get_or(config, "burn_in", 1000);
  const int thin = detail::get_or(config, "thin", 1);
  if (iters <= burn_in) throw ConfigError("gibbs: iters must exceed burn_in");
  GibbsHyper hyper;
  hyper.v0 = detail::get_or(config, "v0", 0.01);
  hyper.a1 = detail::get_or(config, "a1", 1.0);
  hyper.a2 = detail::get_or(config, "a2", 1.0);
  const bool lower_tri = detail::get_or(config, "lower_triangular", true);
  const double threshold = detail::get_or(config, "threshold", 0.1);
  const std::uint64_t seed = detail::get_or<std::uint64_t>(config, "seed", 1);

  std::ofstream chain(detail::out_path(config, "chain.csv"));
  chain << "sweep";
  for (int j = 0; j < data.n_items(); ++j)
    for (int c = 0; c < k; ++c) chain << ",B" << (j + 1) << "_" << (c + 1);
  for (int j = 0; j < data.n_items(); ++j) chain << ",d" << (j + 1);
  chain << "\n";
  int sweep_no = 0;
  Rng rng(seed);
  const GibbsRun run = run_gibbs(
      data.values, k, iters, burn_in, thin, lower_tri, hyper, rng, [&](const GibbsState& s) {
        chain << ++sweep_no;
        for (int j = 0; j < data.n_items(); ++j)
          for (int c = 0; c < k; ++c) chain << "," << format_double(s.loading(j, c));
        for (int j = 0; j < data.n_items(); ++j) chain << "," << format_double(s.intercept(j));
        chain << "\n";
      });

  write_matrix_csv(detail::out_path(config, "gibbs_loading.csv"), run.loading_mean, "f");
  std::vector<Vector> d_mean(static_cast<size_t>(data.n_items()));
  for (int j = 0; j < data.n_items(); ++j) d_mean[static_cast<size_t>(j)] = Vector::Constant(1, run.intercept_mean(j));
  write_intercepts_csv(detail::out_path(config, "gibbs_intercepts.csv"), data, d_mean);

  Json report;
  report["retained"] = run.retained;
  report["threshold"] = threshold;
  report["support_after_threshold"] = support_count(run.loading_mean, threshold);
  if (config.contains("truth_loading")) {
    const Matrix b_true = read_matrix_csv(config.at("truth_loading").get<std::string>());
    report["metrics"] = detail::metrics_json(run.loading_mean, b_true, threshold);
  }
  write_json(detail::out_path(config, "gibbs_report.json"), report);
  detail::write_manifest(config, "gibbs");
}

// score: posterior mean/sd of the latent factors for each respondent row.
inline void cmd_score(const Json& config) {
  const ResponseMatrix data = read_response_csv(config.at("data").get<std::string>());
  const std::string params_dir = config.at("params_dir").get<std::string>();
  ModelParams params;
  params.loading = read_matrix_csv((std::filesystem::path(params_dir) / "loading.csv").string());
  params.intercepts =
      read_intercepts_csv((std::filesystem::path(params_dir) / "intercepts.csv").string());
  const Matrix rv =
      read_matrix_csv((std::filesystem::path(params_dir) / "resid_var.csv").string());
  params.resid_var = rv.row(0).transpose();
  params.ibp_weights = Vector::Constant(params.loading.cols(), 0.5);

  if (params.loading.rows() != data.n_items())
    throw DataError("score: parameter / data item-count mismatch");
  const std::vector<std::string> issues = validate(params, data);
  if (!issues.empty()) throw DataError("score: invalid parameters: " + issues.front());

  const int m = detail::get_or(config, "m", 500);
  const int threads = detail::get_or(config, "threads", default_thread_count());
  const std::uint64_t seed = detail::get_or<std::uint64_t>(config, "seed", 1);
  const Rng base(seed);

  const int k = params.k_star();
  Matrix scores(data.n_obs(), 2 * k);
  parallel_for(data.n_obs(), threads, [&](int i) {
    Rng rng = base.substream(0x5c03e, static_cast<std::uint64_t>(i));
    const auto [mean, sd] = score_factors(params, data.items, data.values.row(i).transpose(), m, rng);
    scores.row(i).head(k) = mean.transpose();
    scores.row(i).tail(k) = sd.transpose();
  });

  std::ofstream out(detail::out_path(config, "scores.csv"));
  for (int c = 0; c < k; ++c) out << (c ? "," : "") << "mean" << (c + 1);
  for (int c = 0; c < k; ++c) out << ",sd" << (c + 1);
  out << "\n";
  for (int i = 0; i < data.n_obs(); ++i) {
    for (int c = 0; c < 2 * k; ++c) out << (c ? "," : "") << format_double(scores(i, c));
    out << "\n";
  }
  detail::write_manifest(config, "score");
}

// metrics: compare an estimated loading matrix against ground truth.
inline void cmd_metrics(const Json& config) {
  const Matrix b_est = read_matrix_csv(config.at("est_loading").get<std::string>());
  const Matrix b_true = read_matrix_csv(config.at("truth_loading").get<std::string>());
  const double threshold = detail::get_or(config, "threshold", 0.0);
  Json metrics = detail::metrics_json(b_est, b_true, threshold);
  if (config.contains("est_intercepts") && config.contains("truth_intercepts")) {
    metrics["intercept_mse"] = intercept_mse(
        read_intercepts_csv(config.at("est_intercepts").get<std::string>()),
        read_intercepts_csv(config.at("truth_intercepts").get<std::string>()));
  }
  write_json(detail::out_path(config, "metrics.json"), metrics);
  detail::write_manifest(config, "metrics");
}

// heatmap: render a loading CSV as an SVG.
inline void cmd_heatmap(const Json& config) {
  const Matrix loading = read_matrix_csv(config.at("loading").get<std::string>());
  const std::string title = detail::get_or<std::string>(config, "title", "");
  write_loading_heatmap(detail::out_path(config, "heatmap.svg"), loading, title);
  detail::write_manifest(config, "heatmap");
}

}  // namespace mirt
