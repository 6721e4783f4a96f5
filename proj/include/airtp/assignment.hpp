#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "airtp/channel.hpp"
#include "airtp/projection.hpp"
#include "airtp/transceiver.hpp"

namespace airtp {

// Hyperparameters of the stochastic SCA driver. The defaults follow the
// step-size schedules rho^tau = 1/(tau+1)^a and gamma^tau = c/(c'+tau),
// with the surrogate curvatures eta0/eta1 in the 1e-2..1e-1 band.
// Which per-sample objective gradient feeds the surrogate recursion.
// The max-min beamformer equalizes the per-device constraint pressures
// at the anchor, so the plain argmax subgradient sits on an N-way tie
// and carries no direction; the dual-weighted gradient resolves the tie
// with the inner problem's estimated dual weights.
enum class GradientMode { active_subgradient, dual_weighted };

struct ScaConfig {
  double eta0 = 0.05;
  double eta1 = 0.05;
  double rho_exponent = 0.8;  // a in (0.5, 1]
  double gamma_c = 15.0;
  double gamma_cprime = 14.0;
  double tolerance = 1e-3;
  std::size_t max_iters = 1000;
  // Increments must stay below tolerance for this many consecutive
  // iterations before the run is declared converged; a single small
  // increment of the stochastic iterate is routinely a noise dip.
  std::size_t stability_window = 5;
  GradientMode gradient_mode = GradientMode::dual_weighted;
  ShortTermOpts short_term;  // sigma2 is overwritten from the channel config

  void validate() const {
    if (eta0 <= 0.0 || eta1 <= 0.0) throw DomainError("ScaConfig: curvatures must be positive");
    if (rho_exponent <= 0.5 || rho_exponent > 1.0)
      throw DomainError("ScaConfig: rho_exponent must lie in (0.5, 1]");
    if (gamma_c <= 0.0 || gamma_cprime <= 0.0)
      throw DomainError("ScaConfig: gamma schedule constants must be positive");
    if (tolerance <= 0.0) throw DomainError("ScaConfig: tolerance must be positive");
    if (max_iters < 1) throw DomainError("ScaConfig: max_iters must be >= 1");
  }

  double rho(std::size_t tau) const {
    return 1.0 / std::pow(static_cast<double>(tau) + 1.0, rho_exponent);
  }
  // gamma^tau clamped into (0, 1]; the raw schedule exceeds 1 for small tau.
  double gamma(std::size_t tau) const {
    return std::min(1.0, gamma_c / (gamma_cprime + static_cast<double>(tau)));
  }
};

// Tracked first-order information of the stochastic surrogates.
struct SurrogateState {
  AssignmentPolicy m_current;
  std::vector<double> u0;                // tracked objective gradient
  std::vector<std::vector<double>> u1;   // per-device constraint gradient rows
  std::vector<double> f1_current;        // constraint values at the anchor
  double f0bar_current = 0.0;
  std::size_t iter = 0;

  static SurrogateState initial(const AssignmentPolicy& m0) {
    SurrogateState s;
    s.m_current = m0;
    s.u0.assign(m0.size(), 0.0);
    s.u1.assign(m0.size(), std::vector<double>(m0.size(), 0.0));
    s.f1_current.assign(m0.size(), 0.0);
    return s;
  }
};

struct ScaIterationRecord {
  std::size_t tau;
  std::vector<double> m;
  double f0bar;
  double delta_m;
  double feasibility_slack;  // mu from the feasibility subproblem, 0 when (27)-style step
};

struct ScaHistory {
  std::vector<ScaIterationRecord> records;
  bool converged = false;
};

// --- sample-wise objective and constraints ---------------------------------

namespace detail {

// Channel quality of each device under the frozen normalized beamformer:
// kappa_n(m) = q_n / residual_n(m) with q_n independent of m.
inline std::vector<double> frozen_channel_quality(const TransceiverSolution& sol,
                                                  const DeviceProfile& prof,
                                                  const ChannelSample& ch) {
  std::vector<double> q(ch.n_devices());
  if (!sol.mimo) {
    for (std::size_t n = 0; n < q.size(); ++n) {
      const double eff = std::norm(vdot(sol.beamformer, ch.gains[n].col(0)));
      if (eff <= kDegenerateChannelCutoff * kDegenerateChannelCutoff)
        throw DegenerateChannelError("frozen beamformer is orthogonal to device " +
                                     std::to_string(n));
      q[n] = prof.payload_symbols / eff;
    }
  } else {
    const CMatrix gh = sol.beamformer.adjoint();
    const double streams = static_cast<double>(sol.beamformer.cols());
    for (std::size_t n = 0; n < q.size(); ++n) {
      const CMatrix eff = gh * ch.gains[n];
      q[n] = prof.payload_symbols / streams *
             trace_inverse_psd(eff * eff.adjoint(), 1e-10, "frozen_channel_quality");
    }
  }
  return q;
}

inline std::size_t argmax_lowest_index(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace detail

// Sample objective: sigma^2 * max_n kappa_n(m) with the normalized
// beamformer frozen from `sol`. At the anchor assignment this equals
// sol.analytic_mse.
inline double sample_objective(const AssignmentPolicy& m, const TransceiverSolution& sol,
                               const DeviceProfile& prof, const ChannelSample& ch,
                               double sigma2) {
  const std::vector<double> res = residual_power(m, prof);
  const std::vector<double> q = detail::frozen_channel_quality(sol, prof, ch);
  double worst = 0.0;
  for (std::size_t n = 0; n < q.size(); ++n) worst = std::max(worst, q[n] / res[n]);
  return sigma2 * worst;
}

// Subgradient of sample_objective: supported on the argmax device (ties
// broken toward the lowest index), where
// d/dm = sigma^2 * kappa * e * s_tot / residual.
inline std::vector<double> sample_obj_gradient(const AssignmentPolicy& m,
                                               const TransceiverSolution& sol,
                                               const DeviceProfile& prof,
                                               const ChannelSample& ch, double sigma2) {
  const std::vector<double> res = residual_power(m, prof);
  const std::vector<double> q = detail::frozen_channel_quality(sol, prof, ch);
  std::vector<double> kappa(q.size());
  for (std::size_t n = 0; n < q.size(); ++n) kappa[n] = q[n] / res[n];
  const std::size_t star = detail::argmax_lowest_index(kappa);
  std::vector<double> grad(q.size(), 0.0);
  grad[star] = sigma2 * kappa[star] * prof.energy_coeff[star] * prof.params_per_layer / res[star];
  return grad;
}

// Dual-weighted gradient: the per-device gradients mixed with the
// max-min dual weights estimated during the short-term solve. This is
// the total derivative of the sample MSE through the binding constraint
// set rather than one arbitrary element of its subdifferential.
inline std::vector<double> sample_obj_gradient_weighted(const AssignmentPolicy& m,
                                                        const TransceiverSolution& sol,
                                                        const DeviceProfile& prof,
                                                        const ChannelSample& ch, double sigma2) {
  const std::vector<double> res = residual_power(m, prof);
  const std::vector<double> q = detail::frozen_channel_quality(sol, prof, ch);
  std::vector<double> grad(q.size(), 0.0);
  if (sol.active_weights.size() != q.size())
    return sample_obj_gradient(m, sol, prof, ch, sigma2);
  for (std::size_t n = 0; n < q.size(); ++n) {
    const double kappa = q[n] / res[n];
    grad[n] = sigma2 * sol.active_weights[n] * kappa * prof.energy_coeff[n] *
              prof.params_per_layer / res[n];
  }
  return grad;
}

// Per-device power usage f_1(m) with the precoders frozen from `sol`.
inline std::vector<double> constraint_value(const AssignmentPolicy& m,
                                            const TransceiverSolution& sol,
                                            const DeviceProfile& prof) {
  if (m.size() != prof.n_devices())
    throw DimensionError("constraint_value: assignment length mismatch");
  std::vector<double> f(m.size());
  for (std::size_t n = 0; n < m.size(); ++n) {
    double comm;
    if (!sol.mimo) {
      comm = prof.payload_symbols * std::norm(sol.precoders_scalar[n]);
    } else {
      const CMatrix& b = sol.precoders_mimo[n];
      comm = prof.payload_symbols / static_cast<double>(prof.symbols_per_round) *
             b.norm_fro() * b.norm_fro();
    }
    f[n] = prof.energy_coeff[n] * m.m[n] * prof.params_per_layer + comm;
  }
  return f;
}

// Recursive surrogate updates: u <- (1 - rho) u + rho * grad.
inline void update_surrogates(SurrogateState& state, const std::vector<double>& grad0,
                              double f0bar, const std::vector<std::vector<double>>& grad1,
                              double rho) {
  if (rho <= 0.0 || rho > 1.0) throw DomainError("update_surrogates: rho outside (0, 1]");
  if (grad0.size() != state.u0.size() || grad1.size() != state.u1.size())
    throw DimensionError("update_surrogates: gradient length mismatch");
  for (std::size_t i = 0; i < state.u0.size(); ++i)
    state.u0[i] = (1.0 - rho) * state.u0[i] + rho * grad0[i];
  for (std::size_t n = 0; n < state.u1.size(); ++n)
    for (std::size_t i = 0; i < state.u1[n].size(); ++i)
      state.u1[n][i] = (1.0 - rho) * state.u1[n][i] + rho * grad1[n][i];
  state.f0bar_current = f0bar;
}

// --- surrogate subproblems ---------------------------------------------------

namespace detail {

// Shared data of the two surrogate subproblems around the anchor m_a:
//   objective   u0^T d + eta0 |d|^2,          d = m - m_a
//   constraints f1_n + u1_n^T d + eta1 |d|^2 <= p_n
struct SurrogateProblem {
  const std::vector<double>& anchor;
  const std::vector<double>& u0;
  const std::vector<std::vector<double>>& u1;
  const std::vector<double>& f1;
  const std::vector<double>& pmax;
  double eta0;
  double eta1;

  std::size_t dim() const { return anchor.size(); }

  // m(lambda) minimizing the Lagrangian over the simplex
  std::vector<double> primal_from_weights(const std::vector<double>& combo,
                                          double curvature) const {
    std::vector<double> x(dim());
    for (std::size_t i = 0; i < dim(); ++i) x[i] = anchor[i] - combo[i] / (2.0 * curvature);
    return project_simplex(x);
  }

  std::vector<double> constraint_values(const std::vector<double>& m) const {
    std::vector<double> g(dim());
    double dsq = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      const double di = m[i] - anchor[i];
      dsq += di * di;
    }
    for (std::size_t n = 0; n < dim(); ++n) {
      double lin = 0.0;
      for (std::size_t i = 0; i < dim(); ++i) lin += u1[n][i] * (m[i] - anchor[i]);
      g[n] = f1[n] + lin + eta1 * dsq - pmax[n];
    }
    return g;
  }

  double objective(const std::vector<double>& m) const {
    double lin = 0.0, dsq = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      const double di = m[i] - anchor[i];
      lin += u0[i] * di;
      dsq += di * di;
    }
    return lin + eta0 * dsq;
  }
};

// Dual ascent for the constrained surrogate problem. Returns the primal
// point and the final KKT residual (max of feasibility violation and
// complementary-slackness defect).
inline std::pair<std::vector<double>, double> solve_surrogate_dual(const SurrogateProblem& sp,
                                                                   double target_residual,
                                                                   int max_iters) {
  const std::size_t n = sp.dim();
  std::vector<double> lambda(n, 0.0);
  std::vector<double> combo(n), m(n), g(n);

  const auto eval = [&](const std::vector<double>& lam, std::vector<double>& m_out,
                        std::vector<double>& g_out) {
    double lam_sum = 0.0;
    for (double l : lam) lam_sum += l;
    for (std::size_t i = 0; i < n; ++i) {
      double s = sp.u0[i];
      for (std::size_t k = 0; k < n; ++k) s += lam[k] * sp.u1[k][i];
      combo[i] = s;
    }
    m_out = sp.primal_from_weights(combo, sp.eta0 + sp.eta1 * lam_sum);
    g_out = sp.constraint_values(m_out);
    double dual = sp.objective(m_out);
    for (std::size_t k = 0; k < n; ++k) dual += lam[k] * g_out[k];
    return dual;
  };

  double dual = eval(lambda, m, g);
  double step = 1.0;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    residual = 0.0;
    double lam_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      residual = std::max(residual, std::max(0.0, g[k]));
      residual = std::max(residual, std::abs(lambda[k] * g[k]));
      lam_sum += lambda[k];
    }
    if (residual < target_residual) break;
    if (lam_sum > 1e10) break;  // diverging multipliers: problem is infeasible

    std::vector<double> lam_try(n), m_try(n), g_try(n);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t k = 0; k < n; ++k)
        lam_try[k] = std::max(0.0, lambda[k] + step * g[k]);
      const double dual_try = eval(lam_try, m_try, g_try);
      if (dual_try >= dual - 1e-15 * (1.0 + std::abs(dual))) {
        lambda = lam_try;
        m = m_try;
        g = g_try;
        dual = dual_try;
        step *= 1.6;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step underflow: dual cannot improve further
  }
  return {m, residual};
}

}  // namespace detail

// Minimizer of the surrogate objective subject to the surrogate power
// constraints over the simplex. Returns nullopt when no simplex point
// satisfies the constraints within 1e-9, so the caller can fall back to
// the feasibility subproblem.
inline std::optional<AssignmentPolicy> solve_surrogate_qp(const SurrogateState& state,
                                                          const DeviceProfile& prof,
                                                          const ScaConfig& cfg) {
  detail::SurrogateProblem sp{state.m_current.m, state.u0,  state.u1,
                              state.f1_current,  prof.power_budget, cfg.eta0, cfg.eta1};
  auto [m, residual] = detail::solve_surrogate_dual(sp, 1e-8, 200000);
  (void)residual;
  const std::vector<double> viol = sp.constraint_values(m);
  double worst = 0.0;
  for (double v : viol) worst = std::max(worst, v);
  if (worst > 1e-9) return std::nullopt;
  AssignmentPolicy out;
  out.m = std::move(m);
  return out;
}

// Feasibility subproblem: minimize the common slack mu with
// f1_hat(m) <= p_max + mu over the simplex, via its saddle-point dual
// (weights over constraints on the simplex).
inline std::pair<AssignmentPolicy, double> solve_surrogate_feasibility(
    const SurrogateState& state, const DeviceProfile& prof, const ScaConfig& cfg) {
  detail::SurrogateProblem sp{state.m_current.m, state.u0,  state.u1,
                              state.f1_current,  prof.power_budget, cfg.eta0, cfg.eta1};
  const std::size_t n = sp.dim();
  std::vector<double> nu(n, 1.0 / static_cast<double>(n));
  std::vector<double> combo(n), m(n), g(n);

  const auto eval = [&](const std::vector<double>& w, std::vector<double>& m_out,
                        std::vector<double>& g_out) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += w[k] * sp.u1[k][i];
      combo[i] = s;
    }
    m_out = sp.primal_from_weights(combo, sp.eta1);
    g_out = sp.constraint_values(m_out);
    // dual value: eta1 |d|^2 + sum_k w_k (linear_k + f1_k - p_k)
    double dsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double di = m_out[i] - sp.anchor[i];
      dsq += di * di;
    }
    double val = sp.eta1 * dsq;
    for (std::size_t k = 0; k < n; ++k) val += w[k] * (g_out[k] - sp.eta1 * dsq);
    return val;
  };

  double dual = eval(nu, m, g);
  double step = 1.0;
  std::vector<double> nu_try(n), m_try(n), g_try(n), grad(n);
  for (int it = 0; it < 200000; ++it) {
    // ascent direction: constraint values minus the shared curvature term
    double dsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double di = m[i] - sp.anchor[i];
      dsq += di * di;
    }
    for (std::size_t k = 0; k < n; ++k) grad[k] = g[k] - sp.eta1 * dsq;
    // optimality gap: max_k grad_k vs the weighted combination
    double upper = -std::numeric_limits<double>::infinity();
    double weighted = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      upper = std::max(upper, grad[k]);
      weighted += nu[k] * grad[k];
    }
    if (upper - weighted < 1e-10) break;

    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t k = 0; k < n; ++k) nu_try[k] = nu[k] + step * grad[k];
      nu_try = project_simplex(nu_try);
      const double dual_try = eval(nu_try, m_try, g_try);
      if (dual_try >= dual - 1e-15 * (1.0 + std::abs(dual))) {
        nu = nu_try;
        m = m_try;
        g = g_try;
        dual = dual_try;
        step *= 1.6;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  double mu = -std::numeric_limits<double>::infinity();
  for (double v : g) mu = std::max(mu, v);
  AssignmentPolicy out;
  out.m = std::move(m);
  return {out, mu};
}

// --- mixed-timescale driver ---------------------------------------------------

// One SCA iteration: channel sample, short-term solve, surrogate update,
// surrogate subproblem, convex-combination step.
inline ScaIterationRecord sca_step(SurrogateState& state, const DeviceProfile& prof,
                                   const ChannelConfig& chcfg, const ScaConfig& cfg, Rng& rng) {
  cfg.validate();
  const ChannelSample ch = sample_channel(chcfg, rng);
  ShortTermOpts opts = cfg.short_term;
  opts.sigma2 = chcfg.noise_power;
  const TransceiverSolution sol = solve_short_term(state.m_current, prof, ch, opts);

  const double f0bar = sample_objective(state.m_current, sol, prof, ch, opts.sigma2);
  const std::vector<double> grad0 =
      cfg.gradient_mode == GradientMode::dual_weighted
          ? sample_obj_gradient_weighted(state.m_current, sol, prof, ch, opts.sigma2)
          : sample_obj_gradient(state.m_current, sol, prof, ch, opts.sigma2);
  std::vector<std::vector<double>> grad1(state.m_current.size(),
                                         std::vector<double>(state.m_current.size(), 0.0));
  for (std::size_t n = 0; n < grad1.size(); ++n)
    grad1[n][n] = prof.energy_coeff[n] * prof.params_per_layer;

  update_surrogates(state, grad0, f0bar, grad1, cfg.rho(state.iter));
  // Constraint rows anchor at the compute-energy envelope. The sampled
  // communication power always fills the residual budget exactly at the
  // binding device (alpha binds by construction), so anchoring the rows
  // at compute + comm would leave the surrogate without a strict
  // interior and pin every iterate; the short-term solver re-allocates
  // communication power within the residual at each sample, and the
  // sample objective already penalizes small residuals.
  for (std::size_t n = 0; n < state.m_current.size(); ++n)
    state.f1_current[n] =
        prof.energy_coeff[n] * state.m_current.m[n] * prof.params_per_layer;

  AssignmentPolicy mhat;
  double slack = 0.0;
  if (auto qp = solve_surrogate_qp(state, prof, cfg)) {
    mhat = std::move(*qp);
  } else {
    auto [fallback, mu] = solve_surrogate_feasibility(state, prof, cfg);
    mhat = std::move(fallback);
    slack = mu;
  }

  const double gamma = cfg.gamma(state.iter);
  ScaIterationRecord rec;
  rec.tau = state.iter;
  rec.f0bar = f0bar;
  rec.feasibility_slack = slack;
  double delta_sq = 0.0;
  for (std::size_t i = 0; i < state.m_current.size(); ++i) {
    const double next = (1.0 - gamma) * state.m_current.m[i] + gamma * mhat.m[i];
    delta_sq += (next - state.m_current.m[i]) * (next - state.m_current.m[i]);
    state.m_current.m[i] = next;
  }
  rec.delta_m = std::sqrt(delta_sq);
  rec.m = state.m_current.m;
  state.iter += 1;
  return rec;
}

// Full long-term optimization (Step 1 of the mixed-timescale algorithm):
// iterate until the assignment stops moving or the iteration cap.
inline std::pair<AssignmentPolicy, ScaHistory> run_assignment(const AssignmentPolicy& m0,
                                                              const DeviceProfile& prof,
                                                              const ChannelConfig& chcfg,
                                                              const ScaConfig& cfg, Rng& rng) {
  m0.validate();
  residual_power(m0, prof);  // reject infeasible starting points up front
  SurrogateState state = SurrogateState::initial(m0);
  ScaHistory history;
  const std::size_t window = std::max<std::size_t>(1, cfg.stability_window);
  std::size_t quiet = 0;
  while (state.iter < cfg.max_iters) {
    const ScaIterationRecord rec = sca_step(state, prof, chcfg, cfg, rng);
    history.records.push_back(rec);
    quiet = rec.delta_m <= cfg.tolerance ? quiet + 1 : 0;
    if (quiet >= std::min(window, history.records.size())) {
      history.converged = true;
      break;
    }
  }
  return {state.m_current, history};
}

// Step 2 of the mixed-timescale algorithm: per all-reduce short-term
// solve at the converged assignment.
inline TransceiverSolution deploy_step(const AssignmentPolicy& m_final, const DeviceProfile& prof,
                                       const ChannelSample& ch, double sigma2,
                                       const ShortTermOpts& base_opts = {}) {
  ShortTermOpts opts = base_opts;
  opts.sigma2 = sigma2;
  return solve_short_term(m_final, prof, ch, opts);
}

}  // namespace airtp
