// Acceptance suite: every reference property checked end to end at its
// stated tolerance, one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
//
// The heavyweight assignment grid oracle ("7b") and the latency ordering
// chain ("9c") are excluded from the default selection; run them with
// --only 7b / --only 9c (ctest registers all three invocations).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "airtp/airtp.hpp"

namespace airtp {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome criterion_partition_equivalence() {
  Rng rng(1001);
  double worst = 0.0;
  const std::size_t n_values[] = {1, 2, 4, 8};
  for (int trial = 0; trial < 100; ++trial) {
    ToyModelConfig cfg;
    cfg.n_heads = 8;
    cfg.d_model = cfg.n_heads * (2 + rng.uniform_index(6));
    cfg.d_hidden = 16 + rng.uniform_index(48);
    cfg.n_layers = 1 + rng.uniform_index(2);
    cfg.vocab_size = 16 + rng.uniform_index(40);
    cfg.max_seq = 16;
    cfg.activation = trial % 2 == 0 ? Activation::relu : Activation::gelu;
    cfg.seed = 5000 + trial;
    const ToyModel model = ToyModel::init(cfg);

    std::vector<std::size_t> tokens(4 + rng.uniform_index(12));
    for (std::size_t& t : tokens) t = rng.uniform_index(cfg.vocab_size);
    const RMatrix central = toy_forward(model, tokens);
    double cmax = 1e-300;
    for (double v : central.raw()) cmax = std::max(cmax, std::abs(v));

    const std::size_t n = n_values[trial % 4];
    std::vector<double> raw(n);
    double mass = 0.0;
    for (double& v : raw) {
      v = 0.2 + rng.uniform();
      mass += v;
    }
    AssignmentPolicy m;
    for (double v : raw) m.m.push_back(v / mass);
    const ModelShards shards = partition_model(model, m, n);
    AllReduceBackend be = AllReduceBackend::make_ideal();
    const RMatrix dist = model_forward(model, tokens, shards, be);
    worst = std::max(worst, dist.max_abs_diff(central) / cmax);
  }
  return {worst < 1e-9, "max relative deviation " + format_value(worst) + " (tol 1e-9)"};
}

Outcome criterion_mse_monte_carlo() {
  std::vector<double> errs(40, 0.0);
  run_parallel(40, [&](std::size_t t) {
    Rng rng(2000 + 17 * t);
    if (t < 20) {
      ChannelConfig cc;
      cc.n_devices = 2 + rng.uniform_index(3);
      cc.server_antennas = 2 + rng.uniform_index(5);
      const ChannelSample ch = sample_channel(cc, rng);
      CMatrix a = sample_complex_gaussian({0, 0}, 1.0, cc.server_antennas, 1, rng);
      a *= 1.0 / std::sqrt(norm2_sq(a));
      std::vector<cplx> b(cc.n_devices);
      for (cplx& v : b) v = rng.complex_normal({0.5, 0.0}, 0.3);
      const double sigma2 = 0.2 + rng.uniform();
      const double analytic = mse_scalar(a, b, ch, sigma2);
      const double mc = oracle::mc_mse_scalar(a, b, ch, sigma2, 1000000, rng);
      errs[t] = std::abs(analytic - mc) / analytic;
    } else {
      ChannelConfig cc;
      cc.n_devices = 2;
      cc.server_antennas = 4;
      cc.device_antennas = 2;
      const ChannelSample ch = sample_channel(cc, rng);
      CMatrix a = sample_complex_gaussian({0, 0}, 1.0, 4, 2, rng);
      a *= 1.0 / a.norm_fro();
      std::vector<CMatrix> b;
      for (std::size_t n = 0; n < 2; ++n)
        b.push_back(sample_complex_gaussian({0.3, 0.0}, 0.4, 2, 2, rng));
      const double sigma2 = 0.2 + rng.uniform();
      const double analytic = mse_mimo(a, b, ch, sigma2);
      const double mc = oracle::mc_mse_mimo(a, b, ch, sigma2, 1000000, rng);
      errs[t] = std::abs(analytic - mc) / analytic;
    }
  });
  const double worst = *std::max_element(errs.begin(), errs.end());
  return {worst < 0.01,
          "worst relative MC deviation " + format_value(worst) + " over 20+20 instances (tol 1%)"};
}

Outcome criterion_zf_optimality() {
  double worst_drop = 0.0;
  // scalar precoders
  {
    Rng rng(3001);
    for (int inst = 0; inst < 100; ++inst) {
      ChannelConfig cc;
      cc.n_devices = 2 + rng.uniform_index(3);
      cc.server_antennas = 2 + rng.uniform_index(5);
      const ChannelSample ch = sample_channel(cc, rng);
      CMatrix a = sample_complex_gaussian({0, 0}, 1.0, cc.server_antennas, 1, rng);
      const std::vector<cplx> zf = zf_precoders_scalar(a, ch);
      // only the perturbed device's misalignment term changes
      std::vector<cplx> eff(cc.n_devices);
      for (std::size_t n = 0; n < cc.n_devices; ++n) eff[n] = vdot(a, ch.gains[n].col(0));
      for (int pert = 0; pert < 10000; ++pert) {
        const std::size_t n = rng.uniform_index(cc.n_devices);
        const cplx delta = rng.complex_normal({0, 0}, rng.uniform());
        const double term = std::norm(eff[n] * (zf[n] + delta) - cplx{1.0, 0.0});
        const double base = std::norm(eff[n] * zf[n] - cplx{1.0, 0.0});
        worst_drop = std::max(worst_drop, base - term);
      }
    }
  }
  // MIMO precoders
  {
    Rng rng(3002);
    for (int inst = 0; inst < 100; ++inst) {
      ChannelConfig cc;
      cc.n_devices = 2;
      cc.server_antennas = 4;
      cc.device_antennas = 2 + rng.uniform_index(2);
      const ChannelSample ch = sample_channel(cc, rng);
      const CMatrix a = sample_complex_gaussian({0, 0}, 1.0, 4, 2, rng);
      const std::vector<CMatrix> zf = zf_precoders_mimo(a, ch);
      const CMatrix ah = a.adjoint();
      for (int pert = 0; pert < 10000; ++pert) {
        const std::size_t n = rng.uniform_index(2);
        const CMatrix eff = ah * ch.gains[n];  // L x N_t
        const CMatrix mis = eff * zf[n] - CMatrix::identity(2);
        const std::size_t i = rng.uniform_index(zf[n].rows());
        const std::size_t j = rng.uniform_index(2);
        const cplx delta = rng.complex_normal({0, 0}, rng.uniform());
        // perturbing B_n(i, j) shifts column j of the misalignment
        double base_col = 0.0, new_col = 0.0;
        for (std::size_t r = 0; r < 2; ++r) {
          base_col += std::norm(mis(r, j));
          new_col += std::norm(mis(r, j) + delta * eff(r, i));
        }
        worst_drop = std::max(worst_drop, base_col - new_col);
      }
    }
  }
  return {worst_drop <= 1e-9,
          "largest MSE drop under perturbation " + format_value(worst_drop) + " (tol 1e-9)"};
}

Outcome criterion_sdr_quality() {
  std::vector<double> scalar_gap(20, 0.0), mimo_gap(10, 0.0);
  run_parallel(30, [&](std::size_t t) {
    if (t < 20) {
      Rng rng(4000 + 13 * t);
      ChannelConfig cc;
      cc.n_devices = 2;
      cc.server_antennas = 2;
      const ChannelSample ch = sample_channel(cc, rng);
      DeviceProfile prof;
      prof.energy_coeff = {0.004, 0.006};
      prof.power_budget = {10, 12};
      prof.params_per_layer = 1000.0;
      prof.payload_symbols = 6.0;
      const AssignmentPolicy m = AssignmentPolicy::uniform(2);
      const TransceiverSolution sol = solve_short_term_scalar(m, prof, ch);
      const double grid = oracle::beamformer_grid_alpha(m, prof, ch);
      scalar_gap[t] = (sol.scale - grid) / grid;
    } else {
      Rng rng(4100 + 13 * t);
      ChannelConfig cc;
      cc.n_devices = 2;
      cc.server_antennas = 2;
      cc.device_antennas = 2;
      const ChannelSample ch = sample_channel(cc, rng);
      DeviceProfile prof;
      prof.energy_coeff = {0.004, 0.006};
      prof.power_budget = {10, 10};
      prof.params_per_layer = 1000.0;
      prof.payload_symbols = 8.0;
      prof.symbols_per_round = 2;
      const AssignmentPolicy m = AssignmentPolicy::uniform(2);
      const TransceiverSolution sol = solve_short_term_mimo(m, prof, ch);
      Rng search(9900 + t);
      const double best = oracle::mimo_random_search_alpha(m, prof, ch, 100000, search);
      mimo_gap[t - 20] = (sol.scale - best) / best;
    }
  });
  const double ws = *std::max_element(scalar_gap.begin(), scalar_gap.end());
  const double wm = *std::max_element(mimo_gap.begin(), mimo_gap.end());
  return {ws < 0.01 && wm < 0.05, "scalar gap " + format_value(ws) + " (tol 1%), mimo gap " +
                                       format_value(wm) + " (tol 5%)"};
}

Outcome criterion_trace_inverse_bound() {
  Rng rng(5001);
  double worst_violation = -1e300;
  for (int rep = 0; rep < 10000; ++rep) {
    const std::size_t n_r = 3 + rng.uniform_index(3);
    const std::size_t streams = 2;
    const CMatrix h = sample_complex_gaussian({1.0, 0.0}, 1.0, n_r, streams, rng);
    CMatrix g = sample_complex_gaussian({0, 0}, 1.0, n_r, streams, rng);
    g *= 1.0 / g.norm_fro();
    const CMatrix eff = g.adjoint() * h;
    const HermEig gram = hermitian_eig(eff * eff.adjoint());
    if (gram.values.front() < 1e-9) continue;
    double lhs = 0.0;
    for (double v : gram.values) lhs += 1.0 / v;
    const auto [lam, vec] = min_eigpair(h.adjoint() * g * g.adjoint() * h);
    worst_violation = std::max(worst_violation, lhs - double(streams) / lam);
  }
  // equality case: a channel with identical singular values (and as many
  // streams as transmit antennas) plus the aligned equal-power beamformer
  CMatrix h_eq(4, 2);
  h_eq(0, 0) = 1.3;
  h_eq(1, 1) = 1.3;
  h_eq(2, 0) = 0.0;
  const CMatrix g_eq = h_eq * cplx{1.0 / (1.3 * std::sqrt(2.0)), 0.0};
  const CMatrix eff = g_eq.adjoint() * h_eq;
  const HermEig gram = hermitian_eig(eff * eff.adjoint());
  double lhs = 0.0;
  for (double v : gram.values) lhs += 1.0 / v;
  const auto [lam, vec] = min_eigpair(h_eq.adjoint() * g_eq * g_eq.adjoint() * h_eq);
  const double eq_gap = std::abs(lhs - 2.0 / lam);
  return {worst_violation <= 1e-9 && eq_gap <= 1e-9,
          "worst violation " + format_value(worst_violation) + ", equality gap " +
              format_value(eq_gap) + " (tol 1e-9)"};
}

ScaConfig acceptance_sca_config() {
  ScaConfig cfg;  // paper schedules: eps 1e-3, a = 4/5, c = 15, c' = 14
  cfg.max_iters = 300;
  return cfg;
}

Outcome criterion_sca_convergence() {
  struct Case {
    bool mimo;
    std::uint64_t seed;
  };
  std::vector<Case> cases;
  for (std::uint64_t s : {11, 23, 57, 91, 104}) cases.push_back({false, s});
  for (std::uint64_t s : {11, 23, 57, 91, 104}) cases.push_back({true, s});
  std::vector<std::size_t> iters(cases.size(), 0);
  std::vector<bool> converged(cases.size(), false);
  run_parallel(cases.size(), [&](std::size_t t) {
    const Case& c = cases[t];
    DeviceProfile prof;
    ChannelConfig cc;
    cc.n_devices = 4;
    cc.server_antennas = 16;
    if (!c.mimo) {
      prof.energy_coeff.assign(4, 0.008);
      prof.power_budget.assign(4, 10.0);
      prof.params_per_layer = 1000.0;
      prof.payload_symbols = 10.0;
    } else {
      cc.device_antennas = 4;
      prof.energy_coeff.assign(4, 0.00075);
      prof.power_budget.assign(4, 10.0);
      prof.params_per_layer = 1000.0;
      prof.payload_symbols = 4.0;
      prof.symbols_per_round = 4;
    }
    const ScaConfig cfg = acceptance_sca_config();
    Rng rng(c.seed);
    const auto [m, hist] = run_assignment(AssignmentPolicy::uniform(4), prof, cc, cfg, rng);
    iters[t] = hist.records.size();
    converged[t] = hist.converged;
  });
  bool all = true;
  std::size_t worst = 0;
  for (std::size_t t = 0; t < cases.size(); ++t) {
    all = all && converged[t] && iters[t] <= 300;
    worst = std::max(worst, iters[t]);
  }
  return {all, "all 10 runs converged, slowest " + std::to_string(worst) + " iterations (cap 300)"};
}

Outcome criterion_symmetric_assignment() {
  std::vector<double> offs(3, 1.0);
  run_parallel(3, [&](std::size_t t) {
    const std::uint64_t seeds[] = {11, 57, 104};
    DeviceProfile prof;
    prof.energy_coeff = {0.008, 0.008};
    prof.power_budget = {10.0, 10.0};
    prof.params_per_layer = 1000.0;
    prof.payload_symbols = 10.0;
    ChannelConfig cc;
    cc.n_devices = 2;
    cc.server_antennas = 16;
    ScaConfig cfg;
    Rng rng(seeds[t]);
    AssignmentPolicy m0;
    m0.m = {0.9, 0.1};
    const auto [m, hist] = run_assignment(m0, prof, cc, cfg, rng);
    offs[t] = std::abs(m.m[0] - 0.5);
  });
  const double worst = *std::max_element(offs.begin(), offs.end());
  return {worst <= 0.05, "worst |m1 - 0.5| = " + format_value(worst) + " over 3 seeds (tol 0.05)"};
}

Outcome criterion_heterogeneous_grid() {
  DeviceProfile prof;
  prof.energy_coeff = {0.012, 0.004};
  prof.power_budget = {10.0, 10.0};
  prof.params_per_layer = 1000.0;
  prof.payload_symbols = 10.0;
  ChannelConfig cc;
  cc.n_devices = 2;
  cc.server_antennas = 4;
  ShortTermOpts opts;
  opts.max_iters = 800;
  opts.sigma2 = cc.noise_power;

  // shared channel draws for both the grid oracle and the SCA evaluation
  Rng ch_rng(7777);
  std::vector<ChannelSample> samples;
  for (int s = 0; s < 500; ++s) samples.push_back(sample_channel(cc, ch_rng));

  const int grid_points = 1001;
  std::vector<double> grid_mse(grid_points, std::numeric_limits<double>::infinity());
  run_parallel(grid_points, [&](std::size_t g) {
    AssignmentPolicy m;
    m.m = {double(g) / double(grid_points - 1), 1.0 - double(g) / double(grid_points - 1)};
    try {
      grid_mse[g] = oracle::average_mse_at(m, prof, samples, cc.noise_power, opts);
    } catch (const InfeasibleAssignmentError&) {
    } catch (const DegenerateChannelError&) {
    }
  });
  double best_grid = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t g = 0; g < grid_mse.size(); ++g)
    if (grid_mse[g] < best_grid) {
      best_grid = grid_mse[g];
      best_idx = g;
    }

  ScaConfig cfg;
  cfg.short_term = opts;
  Rng rng(42);
  const auto [m_sca, hist] = run_assignment(AssignmentPolicy::uniform(2), prof, cc, cfg, rng);
  const double sca_mse = oracle::average_mse_at(m_sca, prof, samples, cc.noise_power, opts);
  const double rel = (sca_mse - best_grid) / best_grid;
  std::ostringstream detail;
  detail << "grid optimum m1=" << double(best_idx) / double(grid_points - 1) << " mse "
         << format_value(best_grid) << "; sca m1=" << format_value(m_sca.m[0]) << " mse "
         << format_value(sca_mse) << "; excess " << format_value(rel) << " (tol 5%)";
  return {rel <= 0.05, detail.str()};
}

Outcome criterion_scheme_error_trends() {
  const std::size_t sweep[] = {2, 4, 8};
  std::vector<double> air(3, 0.0), dig(3, 0.0), fdma(3, 0.0);
  std::vector<std::size_t> tasks{0, 1, 2};
  run_parallel(3, [&](std::size_t t) {
    const std::size_t n = sweep[t];
    ChannelConfig cc;
    cc.n_devices = n;
    cc.server_antennas = 16;
    DeviceProfile prof;
    prof.energy_coeff.assign(n, 0.008);
    prof.power_budget.assign(n, 10.0);
    prof.params_per_layer = 1000.0;
    prof.payload_symbols = 10.0;
    ShortTermOpts opts;
    opts.max_iters = 800;
    const AssignmentPolicy m = AssignmentPolicy::uniform(n);
    Rng rng(6000 + n);
    const int n_samples = 1000;
    for (int s = 0; s < n_samples; ++s) {
      const ChannelSample ch = sample_channel(cc, rng);
      const TransceiverSolution sol = solve_short_term(m, prof, ch, opts);
      std::vector<RMatrix> parts;
      for (std::size_t d = 0; d < n; ++d) parts.push_back(gaussian_matrix(16, 16, 1.0, rng));
      RMatrix ideal(16, 16);
      for (const RMatrix& p : parts) ideal += p;
      const auto mse_of = [&](AllReduceBackend& be) {
        const RMatrix out = all_reduce(parts, be);
        double e = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
          const double d = out.raw()[i] - ideal.raw()[i];
          e += d * d;
        }
        return e / double(out.size());
      };
      AllReduceBackend a = AllReduceBackend::make_aircomp(sol, ch, 1.0, 100 + s);
      AllReduceBackend d8 = AllReduceBackend::make_digital(8);
      AllReduceBackend f = AllReduceBackend::make_fdma(m, prof, ch, 1.0, 200 + s);
      air[t] += mse_of(a) / n_samples;
      dig[t] += mse_of(d8) / n_samples;
      fdma[t] += mse_of(f) / n_samples;
    }
  });
  bool order = true;
  for (int t = 0; t < 3; ++t) order = order && dig[t] <= air[t] && air[t] <= fdma[t];
  const double ratio = fdma[2] / fdma[0];
  std::ostringstream detail;
  detail << "digital (" << format_value(dig[0]) << "," << format_value(dig[1]) << ","
         << format_value(dig[2]) << ") <= aircomp (" << format_value(air[0]) << ","
         << format_value(air[1]) << "," << format_value(air[2]) << ") <= fdma ("
         << format_value(fdma[0]) << "," << format_value(fdma[1]) << "," << format_value(fdma[2])
         << "); fdma N=8/N=2 ratio " << format_value(ratio) << " (need >= 2)";
  return {order && ratio >= 2.0, detail.str()};
}

Outcome criterion_latency_formulas() {
  LatencyConfig lc;
  lc.compute_rate = {1e6};
  bool ok = true;
  std::ostringstream detail;
  ok &= std::abs(transmission_time(AllReduceKind::aircomp, 8, lc) - 4.096e-4) < 1e-12;
  ok &= std::abs(transmission_time(AllReduceKind::fdma, 8, lc) - 3.2768e-3) < 1e-12;
  ok &= std::abs(transmission_time(AllReduceKind::digital, 8, lc) -
                 8.0 * 4096.0 * 8.0 / (1e7 * std::log2(81.0))) < 1e-12;
  for (std::size_t n = 1; n <= 64; ++n)
    ok &= transmission_time(AllReduceKind::aircomp, n, lc) ==
          transmission_time(AllReduceKind::aircomp, 1, lc);
  detail << "formula values exact; aircomp time constant over N in 1..64";
  return {ok, detail.str()};
}

// The full three-way chain (aircomp < fdma < digital) as stated. The
// fdma/digital leg provably reverses once snr*N exceeds 2^Q - 1 = 255,
// which lies inside the stated snr range, so this criterion cannot pass;
// it is kept faithful and red rather than weakened.
Outcome criterion_latency_ordering_chain() {
  LatencyConfig lc;
  lc.compute_rate = {1e6};
  bool ok = true;
  double first_fail_n = 0, first_fail_snr = 0;
  for (std::size_t n : {2, 4, 8, 16, 32, 64}) {
    for (int snr = 1; snr <= 100; ++snr) {
      LatencyConfig c = lc;
      c.snr_rx = snr;
      const double air = transmission_time(AllReduceKind::aircomp, n, c);
      const double fdma = transmission_time(AllReduceKind::fdma, n, c);
      const double dig = transmission_time(AllReduceKind::digital, n, c);
      if (!(air < fdma && fdma < dig)) {
        if (ok) {
          first_fail_n = double(n);
          first_fail_snr = snr;
        }
        ok = false;
      }
    }
  }
  std::ostringstream detail;
  if (ok)
    detail << "aircomp < fdma < digital over the full grid";
  else
    detail << "chain breaks first at N=" << first_fail_n << ", snr=" << first_fail_snr
           << ": digital beats fdma once snr*N > 2^Q - 1 = 255";
  return {ok, detail.str()};
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  const auto ranks = [&](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (double(i) + double(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i] / double(n);
    my += ry[i] / double(n);
  }
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  return num / std::sqrt(dx * dy);
}

Outcome criterion_accuracy_degradation() {
  ToyModelConfig mc;
  mc.d_model = 64;
  mc.d_hidden = 128;
  mc.n_heads = 4;
  mc.n_layers = 2;
  mc.vocab_size = 128;
  mc.seed = 1;
  mc.max_seq = 256;
  TrainOpts topts;
  topts.steps = 300;
  const TrainResult trained = train_char_model(mc, bundled_corpus(), topts);
  const std::vector<std::size_t> eval_ids =
      trained.vocab.encode(bundled_corpus().substr(0, 256));
  const RMatrix clean = toy_forward(trained.model, eval_ids);

  const double sweep[] = {0.0, 0.01, 0.1, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::vector<double>> rows(seeds.size());
  run_parallel(seeds.size(), [&](std::size_t t) {
    Rng rng(9000 + seeds[t]);
    ChannelConfig cc;
    cc.n_devices = 2;
    cc.server_antennas = 4;
    const ChannelSample ch = sample_channel(cc, rng);
    DeviceProfile prof;
    prof.energy_coeff = {0.008, 0.008};
    prof.power_budget = {10, 10};
    prof.params_per_layer = 1000.0;
    prof.payload_symbols = 40.0;
    const AssignmentPolicy m = AssignmentPolicy::uniform(2);
    const TransceiverSolution sol = solve_short_term(m, prof, ch);
    const ModelShards shards = partition_model(trained.model, m, 2);
    for (double s2 : sweep) {
      AllReduceBackend be =
          AllReduceBackend::make_aircomp(sol, ch, s2, 5000 + 131 * seeds[t]);
      const RMatrix noisy = model_forward(trained.model, eval_ids, shards, be);
      rows[t].push_back(s2 * sol.scale);  // injected MSE level
      rows[t].push_back(perplexity(noisy, eval_ids).value);
      rows[t].push_back(logit_deviation(clean, noisy).mean_kl);
    }
  });
  // Spearman of each seed's own 4-point sweep, averaged across seeds
  double sp_ppl = 0.0, sp_kl = 0.0;
  for (const auto& row : rows) {
    std::vector<double> injected, ppls, kls;
    for (std::size_t k = 0; k < row.size(); k += 3) {
      injected.push_back(row[k]);
      ppls.push_back(row[k + 1]);
      kls.push_back(row[k + 2]);
    }
    sp_ppl += spearman(injected, ppls) / double(rows.size());
    sp_kl += spearman(injected, kls) / double(rows.size());
  }
  std::ostringstream detail;
  detail << "mean per-seed Spearman(injected MSE, perplexity) = " << format_value(sp_ppl)
         << ", Spearman(injected MSE, KL) = " << format_value(sp_kl) << " (need >= 0.9)";
  return {sp_ppl >= 0.9 && sp_kl >= 0.9, detail.str()};
}

Outcome criterion_determinism() {
  ExperimentConfig cfg = default_config();
  cfg.id = ExperimentId::convergence;
  cfg.seeds = {3, 4};
  cfg.channel.n_devices = 2;
  cfg.channel.server_antennas = 4;
  cfg.profile.energy_coeff.assign(2, 0.008);
  cfg.profile.power_budget.assign(2, 10.0);
  cfg.latency.compute_rate.assign(2, 1e6);
  cfg.sca.max_iters = 15;
  cfg.sca.tolerance = 1e-12;
  cfg.sca.short_term.max_iters = 200;

  const auto render = [&]() {
    std::ostringstream os;
    for (const ResultRecord& r : run_experiment(cfg))
      os << r.experiment << '|' << r.param_json << '|' << r.metric << '|'
         << format_value(r.value) << '|' << r.seed << '\n';
    return os.str();
  };
  const std::string a = render();
  const std::string b = render();
  return {a == b && !a.empty(),
          "two runs produced byte-identical records (" + std::to_string(a.size()) + " bytes)"};
}

struct Criterion {
  std::string id;
  std::string title;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace airtp

int main(int argc, char** argv) {
  using airtp::Criterion;
  std::string only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = argv[++i];
  }

  const std::vector<Criterion> criteria = {
      {"1", "partition equivalence of the distributed forward", airtp::criterion_partition_equivalence},
      {"2", "analytic MSE matches Monte-Carlo", airtp::criterion_mse_monte_carlo},
      {"3", "zero-forcing precoders are perturbation-optimal", airtp::criterion_zf_optimality},
      {"4", "SDR solutions near exhaustive oracles", airtp::criterion_sdr_quality},
      {"5", "trace-inverse bound and its equality case", airtp::criterion_trace_inverse_bound},
      {"6", "assignment optimization converges within 300 iterations", airtp::criterion_sca_convergence},
      {"7a", "symmetric assignment reaches the balanced point", airtp::criterion_symmetric_assignment},
      {"7b", "heterogeneous assignment matches the 1-D grid oracle", airtp::criterion_heterogeneous_grid},
      {"8", "aggregation error ordering across schemes", airtp::criterion_scheme_error_trends},
      {"9a", "transmission-time formula values", airtp::criterion_latency_formulas},
      {"9c", "three-way transmission-time ordering chain", airtp::criterion_latency_ordering_chain},
      {"10", "accuracy degrades monotonically with injected noise", airtp::criterion_accuracy_degradation},
      {"11", "bit-identical results for identical config and seed", airtp::criterion_determinism},
  };

  int failures = 0;
  int ran = 0;
  for (const Criterion& c : criteria) {
    const bool selected = only.empty() ? (c.id != "7b" && c.id != "9c") : c.id == only;
    if (!selected) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    airtp::Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %s: %s — %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL",
                c.id.c_str(), c.title.c_str(), outcome.detail.c_str(), secs);
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matches --only %s\n", only.c_str());
    return 64;
  }
  return failures;
}
