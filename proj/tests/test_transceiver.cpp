#include <gtest/gtest.h>

#include <cmath>

#include "airtp/oracles.hpp"
#include "airtp/transceiver.hpp"

namespace airtp {
namespace {

DeviceProfile basic_profile(std::size_t n, double energy = 0.005, double budget = 10.0,
                            double payload = 10.0) {
  DeviceProfile p;
  p.energy_coeff.assign(n, energy);
  p.power_budget.assign(n, budget);
  p.params_per_layer = 1000.0;
  p.payload_symbols = payload;
  return p;
}

TEST(MseScalar, ZeroForcingLeavesOnlyNoise) {
  Rng rng(3);
  ChannelConfig cc;
  cc.n_devices = 3;
  cc.server_antennas = 4;
  const ChannelSample ch = sample_channel(cc, rng);
  CMatrix a = sample_complex_gaussian({0, 0}, 1.0, 4, 1, rng);
  const std::vector<cplx> b = zf_precoders_scalar(a, ch);
  EXPECT_NEAR(mse_scalar(a, b, ch, 0.4), 0.4 * norm2_sq(a), 1e-10);
}

TEST(MseScalar, ZeroPrecodersCostOnePerDevice) {
  Rng rng(5);
  ChannelConfig cc;
  cc.n_devices = 4;
  cc.server_antennas = 3;
  const ChannelSample ch = sample_channel(cc, rng);
  CMatrix a = sample_complex_gaussian({0, 0}, 1.0, 3, 1, rng);
  const std::vector<cplx> b(4, cplx{0.0, 0.0});
  EXPECT_NEAR(mse_scalar(a, b, ch, 0.25), 4.0 + 0.25 * norm2_sq(a), 1e-12);
}

TEST(MseScalar, MatchesMonteCarlo) {
  Rng rng(7);
  ChannelConfig cc;
  cc.n_devices = 3;
  cc.server_antennas = 4;
  const ChannelSample ch = sample_channel(cc, rng);
  CMatrix a = sample_complex_gaussian({0, 0}, 1.0, 4, 1, rng);
  a *= 1.0 / std::sqrt(norm2_sq(a));
  std::vector<cplx> b(3);
  for (cplx& v : b) v = rng.complex_normal({0.5, 0.0}, 0.2);
  const double analytic = mse_scalar(a, b, ch, 0.6);
  const double mc = oracle::mc_mse_scalar(a, b, ch, 0.6, 1000000, rng);
  EXPECT_NEAR(mc / analytic, 1.0, 0.01);
}

TEST(MseMimo, ZeroForcingAndZeroPrecoders) {
  Rng rng(11);
  ChannelConfig cc;
  cc.n_devices = 2;
  cc.server_antennas = 4;
  cc.device_antennas = 3;
  const ChannelSample ch = sample_channel(cc, rng);
  CMatrix a = sample_complex_gaussian({0, 0}, 1.0, 4, 2, rng);
  const std::vector<CMatrix> zf = zf_precoders_mimo(a, ch);
  const double fro2 = a.norm_fro() * a.norm_fro();
  EXPECT_NEAR(mse_mimo(a, zf, ch, 0.3), 0.3 * fro2, 1e-8);

  const std::vector<CMatrix> zero(2, CMatrix(3, 2));
  EXPECT_NEAR(mse_mimo(a, zero, ch, 0.3), 2.0 * 2.0 + 0.3 * fro2, 1e-10);
}

TEST(ZfScalar, BasisExamplesAndIdentity) {
  ChannelSample ch;
  ch.gains.push_back(CMatrix::col_vector({1.0, 0.0}));
  CMatrix a = CMatrix::col_vector({1.0, 0.0});
  EXPECT_NEAR(std::abs(zf_precoders_scalar(a, ch)[0] - cplx{1.0, 0.0}), 0.0, 1e-15);

  ch.gains[0] = CMatrix::col_vector({2.0, 0.0});
  EXPECT_NEAR(std::abs(zf_precoders_scalar(a, ch)[0] - cplx{0.5, 0.0}), 0.0, 1e-15);

  Rng rng(13);
  ChannelConfig cc;
  cc.n_devices = 4;
  cc.server_antennas = 5;
  const ChannelSample random_ch = sample_channel(cc, rng);
  const CMatrix ar = sample_complex_gaussian({0, 0}, 1.0, 5, 1, rng);
  const std::vector<cplx> b = zf_precoders_scalar(ar, random_ch);
  for (std::size_t n = 0; n < 4; ++n)
    EXPECT_LT(std::abs(vdot(ar, random_ch.gains[n].col(0)) * b[n] - cplx{1.0, 0.0}), 1e-12);
}

TEST(ZfScalar, DegenerateChannelRejected) {
  ChannelSample ch;
  ch.gains.push_back(CMatrix::col_vector({0.0, 1.0}));
  const CMatrix a = CMatrix::col_vector({1.0, 0.0});
  EXPECT_THROW(zf_precoders_scalar(a, ch), DegenerateChannelError);
}

TEST(ZfMimo, IdentityCasesAndProductIdentity) {
  ChannelSample ch;
  ch.gains.push_back(CMatrix::identity(2));
  const std::vector<CMatrix> b = zf_precoders_mimo(CMatrix::identity(2), ch);
  EXPECT_LT((b[0] - CMatrix::identity(2)).norm_fro(), 1e-12);

  ChannelSample ch2;
  ch2.gains.push_back(CMatrix::identity(2) * cplx{2.0, 0.0});
  const std::vector<CMatrix> b2 = zf_precoders_mimo(CMatrix::identity(2), ch2);
  EXPECT_LT((b2[0] - CMatrix::identity(2) * cplx{0.5, 0.0}).norm_fro(), 1e-12);

  Rng rng(17);
  ChannelConfig cc;
  cc.n_devices = 3;
  cc.server_antennas = 6;
  cc.device_antennas = 3;
  const ChannelSample chr = sample_channel(cc, rng);
  const CMatrix a = sample_complex_gaussian({0, 0}, 1.0, 6, 2, rng);
  const std::vector<CMatrix> br = zf_precoders_mimo(a, chr);
  for (std::size_t n = 0; n < 3; ++n)
    EXPECT_LT((a.adjoint() * chr.gains[n] * br[n] - CMatrix::identity(2)).norm_fro(), 1e-9);
}

TEST(ZfMimo, RankDeficientRejected) {
  ChannelSample ch;
  CMatrix h(2, 2);  // rank one
  h(0, 0) = 1.0;
  h(0, 1) = 1.0;
  ch.gains.push_back(h);
  EXPECT_THROW(zf_precoders_mimo(CMatrix::identity(2), ch), DegenerateChannelError);
}

TEST(AlphaFromBeamformer, ClosedFormSingleDevice) {
  // h = 1, g = 1, P = 10, e*m*s = 2, L0 = 8 -> alpha = 1
  DeviceProfile prof;
  prof.energy_coeff = {2.0};
  prof.power_budget = {10.0};
  prof.params_per_layer = 2.0;
  prof.payload_symbols = 8.0;
  AssignmentPolicy m;
  m.m = {0.5};
  ChannelSample ch;
  ch.gains.push_back(CMatrix::col_vector({1.0}));
  const CMatrix g = CMatrix::col_vector({1.0});
  EXPECT_NEAR(alpha_from_beamformer(g, m, prof, ch), 1.0, 1e-14);

  DeviceProfile doubled = prof;
  doubled.payload_symbols = 16.0;
  EXPECT_NEAR(alpha_from_beamformer(g, m, doubled, ch), 2.0, 1e-14);
}

TEST(AlphaFromBeamformer, MatchesFeasibilityGrid) {
  Rng rng(19);
  ChannelConfig cc;
  cc.n_devices = 3;
  cc.server_antennas = 4;
  const ChannelSample ch = sample_channel(cc, rng);
  const DeviceProfile prof = basic_profile(3);
  CMatrix g = sample_complex_gaussian({0, 0}, 1.0, 4, 1, rng);
  g *= 1.0 / std::sqrt(norm2_sq(g));
  const AssignmentPolicy m = AssignmentPolicy::uniform(3);
  const double alpha = alpha_from_beamformer(g, m, prof, ch);
  const double grid = oracle::alpha_log_grid(g, m, prof, ch, 1000000);
  EXPECT_NEAR(alpha / grid, 1.0, 1e-3);
}

TEST(AlphaFromBeamformer, InfeasibleAssignmentRejected) {
  DeviceProfile prof;
  prof.energy_coeff = {1.0};
  prof.power_budget = {5.0};
  prof.params_per_layer = 10.0;
  prof.payload_symbols = 4.0;
  AssignmentPolicy m;
  m.m = {1.0};  // compute energy 10 > budget 5
  ChannelSample ch;
  ch.gains.push_back(CMatrix::col_vector({1.0}));
  EXPECT_THROW(alpha_from_beamformer(CMatrix::col_vector({1.0}), m, prof, ch),
               InfeasibleAssignmentError);
}

TEST(SolveShortTermScalar, ClosedFormSingleAntenna) {
  DeviceProfile prof;
  prof.energy_coeff = {2.0};
  prof.power_budget = {10.0};
  prof.params_per_layer = 2.0;
  prof.payload_symbols = 8.0;
  AssignmentPolicy m;
  m.m = {0.5};
  ChannelSample ch;
  ch.gains.push_back(CMatrix::col_vector({1.0}));
  ShortTermOpts opts;
  opts.sigma2 = 0.7;
  const TransceiverSolution sol = solve_short_term_scalar(m, prof, ch, opts);
  EXPECT_NEAR(sol.scale, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(sol.precoders_scalar[0]), 1.0, 1e-12);
  EXPECT_NEAR(sol.analytic_mse, 0.7, 1e-12);
}

TEST(SolveShortTermScalar, MatchedFilterForIdenticalChannels) {
  Rng rng(23);
  const CMatrix h = sample_complex_gaussian({1.0, 0.0}, 1.0, 4, 1, rng);
  ChannelSample ch;
  ch.gains = {h, h};
  const DeviceProfile prof = basic_profile(2);
  const AssignmentPolicy m = AssignmentPolicy::uniform(2);
  const TransceiverSolution sol = solve_short_term_scalar(m, prof, ch);
  const std::vector<double> res = residual_power(m, prof);
  EXPECT_NEAR(sol.scale, prof.payload_symbols / (res[0] * norm2_sq(h)), 1e-9);
  const double overlap = std::norm(vdot(sol.beamformer, h)) / norm2_sq(h);
  EXPECT_NEAR(overlap, 1.0, 1e-9);
}

TEST(SolveShortTermScalar, WithinOnePercentOfBeamformerGrid) {
  Rng rng(29);
  for (int rep = 0; rep < 2; ++rep) {
    ChannelConfig cc;
    cc.n_devices = 2;
    cc.server_antennas = 2;
    const ChannelSample ch = sample_channel(cc, rng);
    const DeviceProfile prof = basic_profile(2, 0.004, 10.0, 6.0);
    const AssignmentPolicy m = AssignmentPolicy::uniform(2);
    const TransceiverSolution sol = solve_short_term_scalar(m, prof, ch);
    const double grid = oracle::beamformer_grid_alpha(m, prof, ch);
    EXPECT_LT((sol.scale - grid) / grid, 0.01);
  }
}

TEST(SolveShortTermScalar, SolutionSatisfiesContracts) {
  Rng rng(31);
  ChannelConfig cc;
  cc.n_devices = 4;
  cc.server_antennas = 8;
  const DeviceProfile prof = basic_profile(4, 0.007);
  const AssignmentPolicy m = AssignmentPolicy::uniform(4);
  for (int rep = 0; rep < 5; ++rep) {
    const ChannelSample ch = sample_channel(cc, rng);
    ShortTermOpts opts;
    opts.sigma2 = 0.8;
    const TransceiverSolution sol = solve_short_term_scalar(m, prof, ch, opts);
    // unit-norm beamformer
    ASSERT_NEAR(norm2_sq(sol.beamformer), 1.0, 1e-9);
    // every device within budget, binding device at budget
    const std::vector<double> usage_mse = {
        mse_scalar(sol.aggregation_beamformer(), sol.precoders_scalar, ch, opts.sigma2)};
    ASSERT_NEAR(usage_mse[0], sol.analytic_mse, 1e-9);
    for (std::size_t n = 0; n < 4; ++n) {
      const double usage = prof.energy_coeff[n] * m.m[n] * prof.params_per_layer +
                           prof.payload_symbols * std::norm(sol.precoders_scalar[n]);
      ASSERT_LE(usage, prof.power_budget[n] + 1e-6);
    }
    // dual weights live on the simplex
    double wsum = 0.0;
    for (double w : sol.active_weights) {
      ASSERT_GE(w, 0.0);
      wsum += w;
    }
    ASSERT_NEAR(wsum, 1.0, 1e-12);
  }
}

TEST(GaussianRandomization, RankOneReturnsTheFactor) {
  Rng rng(37);
  CMatrix g = sample_complex_gaussian({0, 0}, 1.0, 4, 1, rng);
  g *= 1.0 / std::sqrt(norm2_sq(g));
  const CMatrix ghat = outer(g);
  const auto objective = [&](const CMatrix& cand) { return -std::norm(vdot(cand, g)); };
  Rng draw(99);
  const CMatrix best = gaussian_randomization(ghat, objective, 50, draw);
  EXPECT_NEAR(std::norm(vdot(best, g)), 1.0, 1e-10);  // equal up to phase
}

TEST(GaussianRandomization, ZeroDrawsFallsBackToDominantEigenvector) {
  Rng rng(41);
  const CMatrix a = hermitize(sample_complex_gaussian({0, 0}, 1.0, 4, 4, rng));
  const CMatrix ghat = project_spectrahedron(a, 1.0);
  const HermEig eig = hermitian_eig(ghat);
  int calls = 0;
  const auto objective = [&](const CMatrix& cand) {
    ++calls;
    return -std::abs(cand(0, 0));
  };
  Rng draw(1);
  const CMatrix best = gaussian_randomization(ghat, objective, 0, draw);
  EXPECT_EQ(calls, 1);
  EXPECT_NEAR(std::norm(vdot(best, eig.vectors.col(3))), 1.0, 1e-12);
}

TEST(GaussianRandomization, NeverWorseThanDominantEigenvector) {
  Rng rng(43);
  for (int rep = 0; rep < 5; ++rep) {
    CMatrix v1 = sample_complex_gaussian({0, 0}, 1.0, 4, 1, rng);
    v1 *= 1.0 / std::sqrt(norm2_sq(v1));
    CMatrix v2 = sample_complex_gaussian({0, 0}, 1.0, 4, 1, rng);
    const cplx c = vdot(v1, v2);
    for (std::size_t i = 0; i < 4; ++i) v2(i, 0) -= c * v1(i, 0);
    v2 *= 1.0 / std::sqrt(norm2_sq(v2));
    const CMatrix ghat = 0.6 * outer(v1) + 0.4 * outer(v2);
    const CMatrix target = sample_complex_gaussian({0, 0}, 1.0, 4, 1, rng);
    const auto objective = [&](const CMatrix& g) { return -std::norm(vdot(g, target)); };
    const HermEig eig = hermitian_eig(ghat);
    Rng draw(1000 + rep);
    const CMatrix best = gaussian_randomization(ghat, objective, 100, draw);
    ASSERT_LE(objective(best), objective(eig.vectors.col(3)) + 1e-12);
  }
}

TEST(SolveShortTermMimo, IdentityChannelClosedForm) {
  DeviceProfile prof;
  prof.energy_coeff = {0.004};
  prof.power_budget = {10.0};
  prof.params_per_layer = 1000.0;
  prof.payload_symbols = 8.0;
  prof.symbols_per_round = 2;
  AssignmentPolicy m;
  m.m = {1.0};
  ChannelSample ch;
  ch.gains.push_back(CMatrix::identity(2));
  const TransceiverSolution sol = solve_short_term_mimo(m, prof, ch);
  const double residual = 10.0 - 4.0;
  EXPECT_NEAR(sol.scale, (8.0 / 2.0) * 4.0 / residual, 1e-9);
  EXPECT_NEAR(sol.beamformer.norm_fro(), 1.0, 1e-9);
}

TEST(SolveShortTermMimo, WithinFivePercentOfRandomSearch) {
  Rng rng(47);
  ChannelConfig cc;
  cc.n_devices = 2;
  cc.server_antennas = 2;
  cc.device_antennas = 2;
  const ChannelSample ch = sample_channel(cc, rng);
  DeviceProfile prof = basic_profile(2, 0.004, 10.0, 8.0);
  prof.symbols_per_round = 2;
  const AssignmentPolicy m = AssignmentPolicy::uniform(2);
  const TransceiverSolution sol = solve_short_term_mimo(m, prof, ch);
  Rng search(48);
  const double best = oracle::mimo_random_search_alpha(m, prof, ch, 100000, search);
  EXPECT_LT((sol.scale - best) / best, 0.05);
}

TEST(SolveShortTermMimo, PowerFeasibleAndMseIdentity) {
  Rng rng(53);
  ChannelConfig cc;
  cc.n_devices = 3;
  cc.server_antennas = 8;
  cc.device_antennas = 4;
  DeviceProfile prof = basic_profile(3, 0.002, 10.0, 4.0);
  prof.symbols_per_round = 4;
  const AssignmentPolicy m = AssignmentPolicy::uniform(3);
  const ChannelSample ch = sample_channel(cc, rng);
  ShortTermOpts opts;
  opts.sigma2 = 0.9;
  const TransceiverSolution sol = solve_short_term_mimo(m, prof, ch, opts);
  EXPECT_NEAR(sol.beamformer.norm_fro(), 1.0, 1e-9);
  EXPECT_NEAR(mse_mimo(sol.aggregation_beamformer(), sol.precoders_mimo, ch, opts.sigma2),
              sol.analytic_mse, 1e-8);
  for (std::size_t n = 0; n < 3; ++n) {
    const CMatrix& b = sol.precoders_mimo[n];
    const double usage = prof.energy_coeff[n] * m.m[n] * prof.params_per_layer +
                         prof.payload_symbols / 4.0 * b.norm_fro() * b.norm_fro();
    ASSERT_LE(usage, prof.power_budget[n] + 1e-6);
  }
}

TEST(TraceInverseBound, HoldsAndTightWhenWellConditioned) {
  Rng rng(59);
  // random pairs: tr((G^H H H^H G)^{-1}) <= L / lambda_min(H^H G G^H H)
  for (int rep = 0; rep < 500; ++rep) {
    const CMatrix h = sample_complex_gaussian({1.0, 0.0}, 1.0, 4, 2, rng);
    CMatrix g = sample_complex_gaussian({0, 0}, 1.0, 4, 2, rng);
    g *= 1.0 / g.norm_fro();
    const CMatrix eff = g.adjoint() * h;
    const HermEig gram = hermitian_eig(eff * eff.adjoint());
    if (gram.values.front() < 1e-8) continue;
    double lhs = 0.0;
    for (double v : gram.values) lhs += 1.0 / v;
    const auto [lam, vec] = min_eigpair(h.adjoint() * g * g.adjoint() * h);
    ASSERT_LE(lhs, 2.0 / std::max(lam, 1e-300) + 1e-9);
  }
  // equality: channel with identical singular values (streams matching
  // transmit antennas) and the aligned equal-power beamformer
  CMatrix h(4, 2);
  h(0, 0) = 1.7;
  h(1, 1) = 1.7;
  const CMatrix g = h * cplx{1.0 / (1.7 * std::sqrt(2.0)), 0.0};
  const CMatrix eff = g.adjoint() * h;
  const HermEig gram = hermitian_eig(eff * eff.adjoint());
  double lhs = 0.0;
  for (double v : gram.values) lhs += 1.0 / v;
  const auto [lam, vec] = min_eigpair(h.adjoint() * g * g.adjoint() * h);
  EXPECT_NEAR(lhs, 2.0 / lam, 1e-9);
}

TEST(ZfOptimality, PerturbationsNeverImproveScalar) {
  Rng rng(61);
  for (int inst = 0; inst < 10; ++inst) {
    ChannelConfig cc;
    cc.n_devices = 3;
    cc.server_antennas = 4;
    const ChannelSample ch = sample_channel(cc, rng);
    CMatrix a = sample_complex_gaussian({0, 0}, 1.0, 4, 1, rng);
    const std::vector<cplx> zf = zf_precoders_scalar(a, ch);
    const double base = mse_scalar(a, zf, ch, 0.5);
    for (int pert = 0; pert < 1000; ++pert) {
      std::vector<cplx> b = zf;
      const std::size_t n = rng.uniform_index(3);
      b[n] += rng.complex_normal({0, 0}, rng.uniform());
      ASSERT_GE(mse_scalar(a, b, ch, 0.5), base - 1e-9);
    }
  }
}

TEST(SpectrahedronAscent, ReturnsTheBestIterateSeen) {
  Rng rng(71);
  std::vector<CMatrix> targets;
  for (int n = 0; n < 3; ++n)
    targets.push_back(hermitize(sample_complex_gaussian({0, 0}, 1.0, 4, 4, rng)));
  std::vector<double> seen;
  const auto value_and_grad = [&](const CMatrix& g, CMatrix& grad, std::size_t& active) {
    double worst = 1e300;
    for (std::size_t n = 0; n < 3; ++n) {
      const double v = fro_inner(targets[n], g);
      if (v < worst) {
        worst = v;
        active = n;
      }
    }
    grad = targets[active];
    return worst;
  };
  std::vector<double> weights;
  const CMatrix best =
      detail::spectrahedron_ascent(4, 300, 3, weights, [&](const CMatrix& g, CMatrix& grad,
                                                           std::size_t& active) {
        const double v = value_and_grad(g, grad, active);
        seen.push_back(v);
        return v;
      });
  CMatrix dummy(4, 4);
  std::size_t ignored = 0;
  const double returned = value_and_grad(best, dummy, ignored);
  // best-so-far over the ascent is non-decreasing and the returned point
  // attains it
  double best_so_far = -1e300;
  for (double v : seen) best_so_far = std::max(best_so_far, v);
  EXPECT_GE(returned, best_so_far - 1e-12);
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-12);
}

TEST(SolveShortTerm, DispatchesOnAntennaConfiguration) {
  Rng rng(67);
  ChannelConfig scalar_cc;
  scalar_cc.n_devices = 2;
  scalar_cc.server_antennas = 4;
  const ChannelSample scalar_ch = sample_channel(scalar_cc, rng);
  const DeviceProfile prof = basic_profile(2);
  EXPECT_FALSE(solve_short_term(AssignmentPolicy::uniform(2), prof, scalar_ch).mimo);

  ChannelConfig mimo_cc = scalar_cc;
  mimo_cc.device_antennas = 2;
  DeviceProfile mimo_prof = prof;
  mimo_prof.symbols_per_round = 2;
  const ChannelSample mimo_ch = sample_channel(mimo_cc, rng);
  EXPECT_TRUE(solve_short_term(AssignmentPolicy::uniform(2), mimo_prof, mimo_ch).mimo);
}

}  // namespace
}  // namespace airtp
