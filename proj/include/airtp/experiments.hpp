#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "airtp/config.hpp"
#include "airtp/model_io.hpp"
#include "airtp/oracles.hpp"
#include "airtp/pool.hpp"
#include "airtp/results.hpp"
#include "airtp/toy_train.hpp"
#include "airtp/tp_runtime.hpp"

namespace airtp {

namespace detail {

inline std::string params_json(std::initializer_list<std::pair<std::string, nlohmann::json>> kv) {
  nlohmann::json j;
  for (const auto& [k, v] : kv) j[k] = v;
  return j.dump();
}

// Channel and profile resized to a sweep point's device count; profile
// entries broadcast from device 0.
inline std::pair<ChannelConfig, DeviceProfile> at_device_count(const ExperimentConfig& cfg,
                                                               std::size_t n) {
  ChannelConfig ch = cfg.channel;
  ch.n_devices = n;
  DeviceProfile prof = cfg.profile;
  prof.energy_coeff.assign(n, cfg.profile.energy_coeff.front());
  prof.power_budget.assign(n, cfg.profile.power_budget.front());
  return {ch, prof};
}

inline double mean_sq_error(const RMatrix& a, const RMatrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.raw()[i] - b.raw()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace detail

// Fig. 3 analogue: per-iteration assignment increments and sample MSE.
inline std::vector<ResultRecord> experiment_convergence(const ExperimentConfig& cfg) {
  const std::string mode = cfg.channel.device_antennas > 1 ? "mimo" : "scalar";
  std::vector<std::vector<ResultRecord>> per_task(cfg.seeds.size());
  run_parallel(cfg.seeds.size(), [&](std::size_t t) {
    const std::uint64_t seed = cfg.seeds[t];
    Rng rng = Rng::derive(seed, 0);
    const AssignmentPolicy m0 = AssignmentPolicy::uniform(cfg.channel.n_devices);
    const auto [mf, hist] = run_assignment(m0, cfg.profile, cfg.channel, cfg.sca, rng);
    std::vector<ResultRecord>& recs = per_task[t];
    for (const ScaIterationRecord& it : hist.records) {
      const std::string pj = detail::params_json({{"mode", mode}, {"tau", it.tau}});
      recs.push_back({to_string(cfg.id), pj, "delta_m", it.delta_m, seed, ""});
      recs.push_back({to_string(cfg.id), pj, "sample_mse", it.f0bar, seed, ""});
    }
    const std::string pj = detail::params_json({{"mode", mode}});
    recs.push_back({to_string(cfg.id), pj, "iterations", double(hist.records.size()), seed, ""});
    recs.push_back({to_string(cfg.id), pj, "converged", hist.converged ? 1.0 : 0.0, seed, ""});
    for (std::size_t n = 0; n < mf.size(); ++n)
      recs.push_back({to_string(cfg.id),
                      detail::params_json({{"mode", mode}, {"device", n}}),
                      "final_assignment", mf.m[n], seed, ""});
  });
  std::vector<ResultRecord> out;
  for (auto& r : per_task) out.insert(out.end(), r.begin(), r.end());
  return out;
}

// Fig. 4(a) analogue: analytic and measured aggregation error per scheme
// across the device sweep.
inline std::vector<ResultRecord> experiment_mse_vs_n(const ExperimentConfig& cfg) {
  struct Task {
    std::size_t n;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t n : cfg.device_counts)
    for (std::uint64_t s : cfg.seeds) tasks.push_back({n, s});
  std::vector<std::vector<ResultRecord>> per_task(tasks.size());

  run_parallel(tasks.size(), [&](std::size_t t) {
    const auto [chcfg, prof] = detail::at_device_count(cfg, tasks[t].n);
    const std::uint64_t seed = tasks[t].seed;
    Rng rng = Rng::derive(seed, 1000 + tasks[t].n);
    const AssignmentPolicy m = AssignmentPolicy::uniform(tasks[t].n);
    ShortTermOpts opts = cfg.sca.short_term;
    opts.sigma2 = chcfg.noise_power;

    double analytic = 0.0, emp_air = 0.0, emp_dig = 0.0, emp_fdma = 0.0;
    const std::size_t probe_rows = 24, probe_cols = 24;
    for (std::size_t s = 0; s < cfg.mc_samples; ++s) {
      const ChannelSample ch = sample_channel(chcfg, rng);
      const TransceiverSolution sol = solve_short_term(m, prof, ch, opts);
      analytic += sol.analytic_mse / double(cfg.mc_samples);

      std::vector<RMatrix> parts;
      for (std::size_t d = 0; d < tasks[t].n; ++d)
        parts.push_back(gaussian_matrix(probe_rows, probe_cols, 1.0, rng));
      RMatrix ideal(probe_rows, probe_cols);
      for (const RMatrix& p : parts) ideal += p;

      AllReduceBackend air =
          AllReduceBackend::make_aircomp(sol, ch, chcfg.noise_power, seed ^ (s * 31 + 7));
      emp_air += detail::mean_sq_error(all_reduce(parts, air), ideal) / double(cfg.mc_samples);
      AllReduceBackend dig = AllReduceBackend::make_digital(cfg.latency.quant_bits);
      emp_dig += detail::mean_sq_error(all_reduce(parts, dig), ideal) / double(cfg.mc_samples);
      AllReduceBackend fd =
          AllReduceBackend::make_fdma(m, prof, ch, chcfg.noise_power, seed ^ (s * 37 + 11));
      emp_fdma += detail::mean_sq_error(all_reduce(parts, fd), ideal) / double(cfg.mc_samples);
    }
    const std::string pj = detail::params_json({{"n_devices", tasks[t].n}});
    std::vector<ResultRecord>& recs = per_task[t];
    recs.push_back({to_string(cfg.id), pj, "aircomp_analytic_mse", analytic, seed, ""});
    recs.push_back({to_string(cfg.id), pj, "aircomp_empirical_mse", emp_air, seed, ""});
    recs.push_back({to_string(cfg.id), pj, "digital_empirical_mse", emp_dig, seed, ""});
    recs.push_back({to_string(cfg.id), pj, "fdma_empirical_mse", emp_fdma, seed, ""});
  });

  std::vector<ResultRecord> out;
  for (auto& r : per_task) out.insert(out.end(), r.begin(), r.end());
  return out;
}

// Fig. 4(b) analogue on the toy model: perplexity and logit deviation per
// scheme across the device sweep.
inline std::vector<ResultRecord> experiment_accuracy_vs_n(const ExperimentConfig& cfg) {
  ToyModelConfig mc = cfg.model;
  TrainOpts topts;
  topts.steps = cfg.train_steps;
  std::string text{bundled_corpus()};
  if (!cfg.text_path.empty()) {
    std::ifstream is(cfg.text_path, std::ios::binary);
    if (!is) throw ConfigError("cannot open text file " + cfg.text_path);
    std::ostringstream buf;
    buf << is.rdbuf();
    text = buf.str();
  }
  const TrainResult trained = train_char_model(mc, text, topts);
  const std::vector<std::size_t> eval_ids = trained.vocab.encode(
      std::string_view(text).substr(0, std::min<std::size_t>(trained.model.cfg.max_seq, 128)));
  const RMatrix clean = toy_forward(trained.model, eval_ids);
  const double clean_ppl = perplexity(clean, eval_ids).value;

  struct Task {
    std::size_t n;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t n : cfg.device_counts)
    for (std::uint64_t s : cfg.seeds) tasks.push_back({n, s});
  std::vector<std::vector<ResultRecord>> per_task(tasks.size());

  run_parallel(tasks.size(), [&](std::size_t t) {
    const auto [chcfg, prof] = detail::at_device_count(cfg, tasks[t].n);
    const std::uint64_t seed = tasks[t].seed;
    Rng rng = Rng::derive(seed, 2000 + tasks[t].n);
    const AssignmentPolicy m = AssignmentPolicy::uniform(tasks[t].n);
    const ModelShards shards = partition_model(trained.model, m, tasks[t].n);
    ShortTermOpts opts = cfg.sca.short_term;
    opts.sigma2 = chcfg.noise_power;
    const ChannelSample ch = sample_channel(chcfg, rng);
    const TransceiverSolution sol = solve_short_term(m, prof, ch, opts);

    std::vector<ResultRecord>& recs = per_task[t];
    const auto eval_backend = [&](const std::string& scheme, AllReduceBackend& be) {
      const RMatrix logits = model_forward(trained.model, eval_ids, shards, be);
      const PerplexityResult ppl = perplexity(logits, eval_ids);
      const LogitDeviation dev = logit_deviation(clean, logits);
      const std::string pj =
          detail::params_json({{"n_devices", tasks[t].n}, {"scheme", scheme}});
      recs.push_back({to_string(cfg.id), pj, "perplexity", ppl.value, seed, ""});
      recs.push_back({to_string(cfg.id), pj, "logit_kl", dev.mean_kl, seed, ""});
      recs.push_back({to_string(cfg.id), pj, "logit_mse", dev.mse, seed, ""});
    };
    AllReduceBackend ideal = AllReduceBackend::make_ideal();
    eval_backend("ideal", ideal);
    AllReduceBackend air =
        AllReduceBackend::make_aircomp(sol, ch, chcfg.noise_power, seed ^ 0x9001);
    eval_backend("aircomp", air);
    AllReduceBackend dig = AllReduceBackend::make_digital(cfg.latency.quant_bits);
    eval_backend("digital", dig);
    AllReduceBackend fd =
        AllReduceBackend::make_fdma(m, prof, ch, chcfg.noise_power, seed ^ 0x9002);
    eval_backend("fdma", fd);
  });

  std::vector<ResultRecord> out;
  out.push_back({to_string(cfg.id), detail::params_json({{"scheme", "clean_centralized"}}),
                 "perplexity", clean_ppl, 0, ""});
  for (auto& r : per_task) out.insert(out.end(), r.begin(), r.end());
  return out;
}

// Fig. 4(c) / Table II analogue from the closed-form latency model.
inline std::vector<ResultRecord> experiment_latency_vs_n(const ExperimentConfig& cfg) {
  std::vector<ResultRecord> out;
  for (std::size_t n : cfg.device_counts) {
    LatencyConfig lc = cfg.latency;
    lc.compute_rate.assign(n, cfg.latency.compute_rate.front());
    const AssignmentPolicy m = AssignmentPolicy::uniform(n);
    for (const auto& [scheme, kind] :
         {std::pair<std::string, AllReduceKind>{"aircomp", AllReduceKind::aircomp},
          {"digital", AllReduceKind::digital},
          {"fdma", AllReduceKind::fdma}}) {
      const PerTokenTime t = per_token_time(m, kind, cfg.profile.params_per_layer, lc);
      const std::string pj = detail::params_json({{"n_devices", n}, {"scheme", scheme}});
      out.push_back({to_string(cfg.id), pj, "compute_s", t.compute_s, 0, ""});
      out.push_back({to_string(cfg.id), pj, "comm_s", t.comm_s, 0, ""});
      out.push_back({to_string(cfg.id), pj, "total_s", t.total_s, 0, ""});
    }
  }
  return out;
}

// Table III analogue: centralized single-device execution versus the
// distributed deployment at the configured device count.
inline std::vector<ResultRecord> experiment_compare_schemes(const ExperimentConfig& cfg) {
  std::vector<ResultRecord> out;
  const std::size_t n = cfg.channel.n_devices;
  {
    LatencyConfig lc = cfg.latency;
    lc.compute_rate.assign(1, cfg.latency.compute_rate.front());
    AssignmentPolicy one;
    one.m = {1.0};
    const PerTokenTime t = per_token_time(one, AllReduceKind::ideal,
                                          cfg.profile.params_per_layer, lc);
    const std::string pj = detail::params_json({{"deployment", "centralized"}});
    out.push_back({to_string(cfg.id), pj, "compute_s", t.compute_s, 0, ""});
    out.push_back({to_string(cfg.id), pj, "comm_s", 0.0, 0, ""});
    out.push_back({to_string(cfg.id), pj, "total_s", t.compute_s, 0, ""});
  }
  LatencyConfig lc = cfg.latency;
  lc.compute_rate.assign(n, cfg.latency.compute_rate.front());
  const AssignmentPolicy m = AssignmentPolicy::uniform(n);
  for (const auto& [scheme, kind] :
       {std::pair<std::string, AllReduceKind>{"aircomp", AllReduceKind::aircomp},
        {"digital", AllReduceKind::digital},
        {"fdma", AllReduceKind::fdma}}) {
    const PerTokenTime t = per_token_time(m, kind, cfg.profile.params_per_layer, lc);
    const std::string pj =
        detail::params_json({{"deployment", "distributed"}, {"scheme", scheme},
                             {"n_devices", n}});
    out.push_back({to_string(cfg.id), pj, "compute_s", t.compute_s, 0, ""});
    out.push_back({to_string(cfg.id), pj, "comm_s", t.comm_s, 0, ""});
    out.push_back({to_string(cfg.id), pj, "total_s", t.total_s, 0, ""});
  }
  return out;
}

inline std::vector<ResultRecord> experiment_oracle_check(const ExperimentConfig& cfg) {
  std::vector<ResultRecord> out;
  const std::vector<OracleCheck> checks = run_oracle_checks(cfg.seeds.front());
  for (const OracleCheck& c : checks) {
    const std::string pj = detail::params_json({{"tolerance", c.tolerance}});
    out.push_back({to_string(cfg.id), pj, c.name + "_margin", c.margin, cfg.seeds.front(), ""});
    out.push_back({to_string(cfg.id), pj, c.name + "_pass", c.pass ? 1.0 : 0.0,
                   cfg.seeds.front(), ""});
  }
  return out;
}

inline std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.id) {
    case ExperimentId::convergence: return experiment_convergence(cfg);
    case ExperimentId::mse_vs_n: return experiment_mse_vs_n(cfg);
    case ExperimentId::accuracy_vs_n: return experiment_accuracy_vs_n(cfg);
    case ExperimentId::latency_vs_n: return experiment_latency_vs_n(cfg);
    case ExperimentId::compare_schemes: return experiment_compare_schemes(cfg);
    case ExperimentId::oracle_check: return experiment_oracle_check(cfg);
  }
  throw ConfigError("run_experiment: unknown experiment id");
}

}  // namespace airtp
