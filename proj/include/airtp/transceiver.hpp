#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "airtp/channel.hpp"
#include "airtp/cmatrix.hpp"
#include "airtp/eig.hpp"
#include "airtp/error.hpp"
#include "airtp/projection.hpp"
#include "airtp/rng.hpp"

namespace airtp {

// Per-device energy model and transmission geometry. e_n is the energy
// cost per weight per layer, P_n^max the per-layer budget, s_tot the
// weights per layer, L0 the entries per all-reduce payload and L the
// entries per transmission round (1 in the scalar signal model).
struct DeviceProfile {
  std::vector<double> energy_coeff;
  std::vector<double> power_budget;
  double params_per_layer = 0.0;   // s_tot
  double payload_symbols = 0.0;    // L0
  std::size_t symbols_per_round = 1;  // L

  std::size_t n_devices() const { return energy_coeff.size(); }

  void validate() const {
    if (energy_coeff.empty() || energy_coeff.size() != power_budget.size())
      throw DimensionError("DeviceProfile: energy_coeff/power_budget length mismatch");
    for (double e : energy_coeff)
      if (e <= 0.0) throw DomainError("DeviceProfile: energy_coeff entries must be positive");
    for (double p : power_budget)
      if (p <= 0.0) throw DomainError("DeviceProfile: power_budget entries must be positive");
    if (params_per_layer <= 0.0) throw DomainError("DeviceProfile: params_per_layer must be positive");
    if (payload_symbols <= 0.0) throw DomainError("DeviceProfile: payload_symbols must be positive");
    if (symbols_per_round < 1) throw DomainError("DeviceProfile: symbols_per_round must be >= 1");
  }
};

// Simplex vector of per-device model fractions.
struct AssignmentPolicy {
  std::vector<double> m;

  static AssignmentPolicy uniform(std::size_t n) {
    AssignmentPolicy p;
    p.m.assign(n, 1.0 / static_cast<double>(n));
    return p;
  }

  std::size_t size() const { return m.size(); }

  void validate() const {
    double s = 0.0;
    for (double v : m) {
      if (v < -1e-12 || v > 1.0 + 1e-12)
        throw DomainError("AssignmentPolicy: entry outside [0, 1]");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw DomainError("AssignmentPolicy: entries do not sum to 1");
  }
};

// Output of the short-term solver. `beamformer` is the normalized
// receive beamformer (unit Frobenius norm); the full aggregation
// beamformer is sqrt(scale) * beamformer.
struct TransceiverSolution {
  CMatrix beamformer;                    // g (N_r x 1) or G (N_r x L)
  double scale = 0.0;                    // alpha
  std::vector<cplx> precoders_scalar;    // b_n
  std::vector<CMatrix> precoders_mimo;   // B_n (N_t x L)
  double analytic_mse = 0.0;
  bool mimo = false;
  // Ergodic frequency with which each device was the bottleneck during
  // the max-min ascent; estimates the inner problem's dual weights.
  std::vector<double> active_weights;

  CMatrix aggregation_beamformer() const { return std::sqrt(scale) * beamformer; }
};

struct ShortTermOpts {
  double sigma2 = 1.0;
  int max_iters = 2000;
  int randomization_draws = 100;       // K for Gaussian randomization
  int mimo_randomization_draws = 100;  // 0 keeps the bare top-L eigenspace extraction
  int mimo_polish_iters = 200;         // subgradient polish of the exact alpha objective
  double rank_one_ratio = 1e-6;
  std::uint64_t randomization_seed = 0x7a69;  // solver stays deterministic per instance
};

inline constexpr double kDegenerateChannelCutoff = 1e-12;

// --- analytic MSE --------------------------------------------------------

// MSE(a, {b_n}) = sum_n |a^H h_n b_n - 1|^2 + sigma^2 a^H a.
inline double mse_scalar(const CMatrix& a, const std::vector<cplx>& b, const ChannelSample& ch,
                         double sigma2) {
  if (sigma2 < 0.0) throw DomainError("mse_scalar: negative noise power");
  if (b.size() != ch.n_devices()) throw DimensionError("mse_scalar: precoder count mismatch");
  if (a.cols() != 1 || a.rows() != ch.server_antennas())
    throw DimensionError("mse_scalar: beamformer shape mismatch");
  double mse = sigma2 * norm2_sq(a);
  for (std::size_t n = 0; n < b.size(); ++n) {
    const cplx gain = vdot(a, ch.gains[n].col(0)) * b[n];
    mse += std::norm(gain - cplx{1.0, 0.0});
  }
  return mse;
}

// MSE(A, {B_n}) = sum_n tr((A^H H_n B_n - I)(.)^H) + sigma^2 tr(A^H A).
inline double mse_mimo(const CMatrix& a, const std::vector<CMatrix>& b, const ChannelSample& ch,
                       double sigma2) {
  if (sigma2 < 0.0) throw DomainError("mse_mimo: negative noise power");
  if (b.size() != ch.n_devices()) throw DimensionError("mse_mimo: precoder count mismatch");
  if (a.rows() != ch.server_antennas())
    throw DimensionError("mse_mimo: beamformer shape mismatch");
  const std::size_t streams = a.cols();
  const CMatrix ah = a.adjoint();
  double mse = sigma2 * a.norm_fro() * a.norm_fro();
  for (std::size_t n = 0; n < b.size(); ++n) {
    if (b[n].rows() != ch.device_antennas() || b[n].cols() != streams)
      throw DimensionError("mse_mimo: precoder shape mismatch");
    CMatrix mis = ah * ch.gains[n] * b[n] - CMatrix::identity(streams);
    mse += mis.norm_fro() * mis.norm_fro();
  }
  return mse;
}

// --- zero-forcing precoders ----------------------------------------------

// b_n = 1 / (a^H h_n).
inline std::vector<cplx> zf_precoders_scalar(const CMatrix& a, const ChannelSample& ch) {
  std::vector<cplx> b(ch.n_devices());
  for (std::size_t n = 0; n < b.size(); ++n) {
    const cplx eff = vdot(a, ch.gains[n].col(0));
    if (std::abs(eff) <= kDegenerateChannelCutoff)
      throw DegenerateChannelError("zf_precoders_scalar: effective channel of device " +
                                   std::to_string(n) + " is degenerate");
    b[n] = cplx{1.0, 0.0} / eff;
  }
  return b;
}

namespace detail {

// Inverse of a Hermitian positive definite matrix via its eigensystem;
// throws when the smallest eigenvalue drops below `cutoff`.
inline CMatrix psd_inverse(const CMatrix& m, double cutoff, const char* who) {
  const HermEig eig = hermitian_eig(m);
  if (eig.values.front() <= cutoff)
    throw DegenerateChannelError(std::string(who) + ": effective channel is rank-deficient");
  const std::size_t n = m.rows();
  CMatrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += eig.vectors(i, k) * std::conj(eig.vectors(j, k)) / eig.values[k];
      inv(i, j) = s;
    }
  return inv;
}

// tr(M^{-1}) for Hermitian positive definite M.
inline double trace_inverse_psd(const CMatrix& m, double cutoff, const char* who) {
  const HermEig eig = hermitian_eig(m);
  if (eig.values.front() <= cutoff)
    throw DegenerateChannelError(std::string(who) + ": effective channel is rank-deficient");
  double s = 0.0;
  for (double lam : eig.values) s += 1.0 / lam;
  return s;
}

}  // namespace detail

// B_n = (A^H H_n)^H (A^H H_n H_n^H A)^{-1}.
inline std::vector<CMatrix> zf_precoders_mimo(const CMatrix& a, const ChannelSample& ch) {
  const CMatrix ah = a.adjoint();
  std::vector<CMatrix> b;
  b.reserve(ch.n_devices());
  for (std::size_t n = 0; n < ch.n_devices(); ++n) {
    const CMatrix eff = ah * ch.gains[n];  // L x N_t
    const CMatrix gram = eff * eff.adjoint();
    const CMatrix inv = detail::psd_inverse(gram, 1e-10, "zf_precoders_mimo");
    b.push_back(eff.adjoint() * inv);
  }
  return b;
}

// --- power accounting ------------------------------------------------------

// P_n^max - e_n m_n s_tot for every device; throws when some device has
// no power left for communication.
inline std::vector<double> residual_power(const AssignmentPolicy& m, const DeviceProfile& prof) {
  prof.validate();
  if (m.size() != prof.n_devices())
    throw DimensionError("residual_power: assignment length mismatch");
  std::vector<double> res(m.size());
  for (std::size_t n = 0; n < m.size(); ++n) {
    res[n] = prof.power_budget[n] - prof.energy_coeff[n] * m.m[n] * prof.params_per_layer;
    if (res[n] <= 0.0)
      throw InfeasibleAssignmentError("device " + std::to_string(n) +
                                      " has no residual power under this assignment");
  }
  return res;
}

// Minimal alpha making every per-device power constraint hold for the
// given normalized beamformer; binds with equality at the argmax device.
inline double alpha_from_beamformer(const CMatrix& g, const AssignmentPolicy& m,
                                    const DeviceProfile& prof, const ChannelSample& ch) {
  const std::vector<double> res = residual_power(m, prof);
  double alpha = 0.0;
  if (g.cols() == 1) {
    for (std::size_t n = 0; n < res.size(); ++n) {
      const double eff = std::norm(vdot(g, ch.gains[n].col(0)));
      if (eff <= kDegenerateChannelCutoff * kDegenerateChannelCutoff)
        throw DegenerateChannelError("alpha_from_beamformer: device " + std::to_string(n) +
                                     " sees a degenerate channel");
      alpha = std::max(alpha, prof.payload_symbols / (res[n] * eff));
    }
  } else {
    const double streams = static_cast<double>(g.cols());
    const CMatrix gh = g.adjoint();
    for (std::size_t n = 0; n < res.size(); ++n) {
      const CMatrix eff = gh * ch.gains[n];
      const double tri =
          detail::trace_inverse_psd(eff * eff.adjoint(), 1e-10, "alpha_from_beamformer");
      alpha = std::max(alpha, prof.payload_symbols / streams * tri / res[n]);
    }
  }
  return alpha;
}

// --- SDR solvers -----------------------------------------------------------

// Draws K candidates from CN(0, Ghat), normalizes each and keeps the one
// with the smallest objective; the dominant eigenvector of Ghat is always
// in the candidate set.
inline CMatrix gaussian_randomization(const CMatrix& ghat,
                                      const std::function<double(const CMatrix&)>& objective,
                                      int draws, Rng& rng) {
  const HermEig eig = hermitian_eig(ghat);
  const std::size_t n = ghat.rows();
  CMatrix best = eig.vectors.col(n - 1);  // dominant eigenvector, unit norm
  double best_obj = objective(best);
  for (int k = 0; k < draws; ++k) {
    CMatrix cand(n, 1);
    for (std::size_t j = 0; j < n; ++j) {
      const double lam = std::max(0.0, eig.values[j]);
      if (lam == 0.0) continue;
      const cplx w = rng.complex_normal({0.0, 0.0}, lam);
      for (std::size_t i = 0; i < n; ++i) cand(i, 0) += eig.vectors(i, j) * w;
    }
    const double nrm = std::sqrt(norm2_sq(cand));
    if (nrm <= 1e-14) continue;
    cand *= 1.0 / nrm;
    const double obj = objective(cand);
    if (obj < best_obj) {
      best_obj = obj;
      best = cand;
    }
  }
  return best;
}

namespace detail {

// Projected supergradient ascent of a concave max-min objective over the
// unit-trace spectrahedron. `value_and_grad` returns the objective at the
// current point, writes the chosen supergradient and reports which
// competitor was the bottleneck. Returns the best iterate seen (the
// running iterate average is kept as a second candidate; best-so-far
// never decreases). `weights` receives the bottleneck frequencies over
// the second half of the ascent, the ergodic estimate of the max-min
// dual weights.
template <typename F>
CMatrix spectrahedron_ascent(std::size_t dim, int iters, std::size_t n_competitors,
                             std::vector<double>& weights, F&& value_and_grad) {
  CMatrix g = CMatrix::identity(dim) * cplx{1.0 / static_cast<double>(dim), 0.0};
  CMatrix avg = g;
  CMatrix best = g;
  CMatrix grad(dim, dim);
  double best_val = -std::numeric_limits<double>::infinity();
  std::vector<double> counts(n_competitors, 0.0);
  double total = 0.0;
  for (int k = 1; k <= iters; ++k) {
    std::size_t active = 0;
    const double val = value_and_grad(g, grad, active);
    if (val > best_val) {
      best_val = val;
      best = g;
    }
    if (2 * k >= iters) {
      counts[active] += 1.0;
      total += 1.0;
    }
    const double gnorm = grad.norm_fro();
    if (gnorm <= 1e-300) break;
    const double step = 1.0 / (std::sqrt(static_cast<double>(k)) * gnorm);
    g = project_spectrahedron(g + step * grad, 1.0);
    const double w = 1.0 / static_cast<double>(k + 1);
    avg = (1.0 - w) * avg + w * g;
  }
  CMatrix dummy(dim, dim);
  std::size_t ignored = 0;
  if (value_and_grad(avg, dummy, ignored) > best_val) best = avg;
  weights.assign(n_competitors, 0.0);
  if (total > 0.0)
    for (std::size_t n = 0; n < n_competitors; ++n) weights[n] = counts[n] / total;
  else if (n_competitors > 0)
    weights[0] = 1.0;
  return best;
}

}  // namespace detail

// Short-term transceiver optimization, single-antenna devices: SDR of the
// min-alpha problem over the unit-trace spectrahedron, solved by projected
// supergradient ascent, followed by beamformer extraction, exact alpha and
// channel-inversion precoders.
inline TransceiverSolution solve_short_term_scalar(const AssignmentPolicy& m,
                                                   const DeviceProfile& prof,
                                                   const ChannelSample& ch,
                                                   const ShortTermOpts& opts = {}) {
  const std::vector<double> res = residual_power(m, prof);
  const std::size_t n_dev = ch.n_devices();
  const std::size_t n_r = ch.server_antennas();
  if (res.size() != n_dev) throw DimensionError("solve_short_term_scalar: device count mismatch");

  std::vector<double> c(n_dev);
  std::vector<CMatrix> hh(n_dev);
  for (std::size_t n = 0; n < n_dev; ++n) {
    c[n] = prof.payload_symbols / res[n];
    hh[n] = outer(ch.gains[n].col(0));
  }

  // maximize min_n tr(h_n h_n^H Ghat) / c_n over {0 <= Ghat <= I, tr = 1}
  const auto value_and_grad = [&](const CMatrix& g, CMatrix& grad, std::size_t& active) {
    double worst = std::numeric_limits<double>::infinity();
    std::size_t worst_n = 0;
    for (std::size_t n = 0; n < n_dev; ++n) {
      const double v = fro_inner(hh[n], g) / c[n];
      if (v < worst) {
        worst = v;
        worst_n = n;
      }
    }
    grad = hh[worst_n] * cplx{1.0 / c[worst_n], 0.0};
    active = worst_n;
    return worst;
  };
  std::vector<double> active_weights;
  const CMatrix ghat =
      detail::spectrahedron_ascent(n_r, opts.max_iters, n_dev, active_weights, value_and_grad);

  const auto alpha_of = [&](const CMatrix& g) {
    double alpha = 0.0;
    for (std::size_t n = 0; n < n_dev; ++n) {
      const double eff = std::norm(vdot(g, ch.gains[n].col(0)));
      if (eff <= kDegenerateChannelCutoff * kDegenerateChannelCutoff)
        return std::numeric_limits<double>::infinity();
      alpha = std::max(alpha, c[n] / eff);
    }
    return alpha;
  };

  const HermEig eig = hermitian_eig(ghat);
  CMatrix g = eig.vectors.col(n_r - 1);
  const bool rank_one =
      n_r == 1 || eig.values[n_r - 2] < opts.rank_one_ratio * std::max(eig.values[n_r - 1], 0.0);
  if (!rank_one) {
    Rng rng(opts.randomization_seed);
    g = gaussian_randomization(ghat, alpha_of, opts.randomization_draws, rng);
  }

  TransceiverSolution sol;
  sol.mimo = false;
  sol.beamformer = g;
  sol.scale = alpha_from_beamformer(g, m, prof, ch);
  sol.precoders_scalar = zf_precoders_scalar(sol.aggregation_beamformer(), ch);
  sol.analytic_mse = opts.sigma2 * sol.scale;
  sol.active_weights = std::move(active_weights);
  return sol;
}

// Short-term transceiver optimization, multi-antenna devices: the relaxed
// max-min lambda_min problem picks the normalized beamformer; alpha and
// the precoders are then recomputed from the exact trace-inverse
// constraint, so the reported solution is always feasible.
inline TransceiverSolution solve_short_term_mimo(const AssignmentPolicy& m,
                                                 const DeviceProfile& prof,
                                                 const ChannelSample& ch,
                                                 const ShortTermOpts& opts = {}) {
  const std::vector<double> res = residual_power(m, prof);
  const std::size_t n_dev = ch.n_devices();
  const std::size_t n_r = ch.server_antennas();
  const std::size_t n_t = ch.device_antennas();
  const std::size_t streams = prof.symbols_per_round;
  if (streams > n_t || streams > n_r)
    throw DomainError("solve_short_term_mimo: symbols_per_round exceeds antenna counts");

  std::vector<double> c(n_dev);
  for (std::size_t n = 0; n < n_dev; ++n) c[n] = prof.payload_symbols / res[n];

  // maximize min_n lambda_min(H_n^H Ghat H_n) / c_n
  const auto value_and_grad = [&](const CMatrix& g, CMatrix& grad, std::size_t& active) {
    double worst = std::numeric_limits<double>::infinity();
    std::size_t worst_n = 0;
    CMatrix worst_vec;
    for (std::size_t n = 0; n < n_dev; ++n) {
      const CMatrix t = ch.gains[n].adjoint() * g * ch.gains[n];
      const auto [lam, vec] = min_eigpair(t);
      const double v = lam / c[n];
      if (v < worst) {
        worst = v;
        worst_n = n;
        worst_vec = vec;
      }
    }
    const CMatrix hv = ch.gains[worst_n] * worst_vec;  // N_r x 1
    grad = outer(hv) * cplx{1.0 / c[worst_n], 0.0};
    active = worst_n;
    return worst;
  };
  std::vector<double> active_weights;
  const CMatrix ghat =
      detail::spectrahedron_ascent(n_r, opts.max_iters, n_dev, active_weights, value_and_grad);

  // top-L eigenspace extraction, rescaled to unit Frobenius norm
  const HermEig eig = hermitian_eig(ghat);
  const auto extract = [&](const HermEig& e) {
    CMatrix g(n_r, streams);
    double mass = 0.0;
    for (std::size_t l = 0; l < streams; ++l) mass += std::max(0.0, e.values[n_r - 1 - l]);
    if (mass <= 0.0) throw DomainError("solve_short_term_mimo: relaxed solution collapsed");
    for (std::size_t l = 0; l < streams; ++l) {
      const double w = std::sqrt(std::max(0.0, e.values[n_r - 1 - l]) / mass);
      for (std::size_t i = 0; i < n_r; ++i) g(i, l) = w * e.vectors(i, n_r - 1 - l);
    }
    return g;
  };
  CMatrix g = extract(eig);

  const auto exact_alpha = [&](const CMatrix& cand) {
    const CMatrix ch_eff = cand.adjoint();
    double alpha = 0.0;
    for (std::size_t n = 0; n < n_dev; ++n) {
      const CMatrix eff = ch_eff * ch.gains[n];
      const double tri =
          detail::trace_inverse_psd(eff * eff.adjoint(), 1e-10, "solve_short_term_mimo");
      alpha = std::max(alpha, prof.payload_symbols / static_cast<double>(streams) * tri / res[n]);
    }
    return alpha;
  };

  if (opts.mimo_randomization_draws > 0) {
    // randomize within the top-L subspace, keep the best exact alpha
    Rng rng(opts.randomization_seed);
    double best_alpha = exact_alpha(g);
    CMatrix span(n_r, streams);
    for (std::size_t l = 0; l < streams; ++l)
      for (std::size_t i = 0; i < n_r; ++i)
        span(i, l) = std::sqrt(std::max(0.0, eig.values[n_r - 1 - l])) *
                     eig.vectors(i, n_r - 1 - l);
    for (int k = 0; k < opts.mimo_randomization_draws; ++k) {
      CMatrix mix = sample_complex_gaussian({0.0, 0.0}, 1.0, streams, streams, rng);
      CMatrix cand = span * mix;
      const double nrm = cand.norm_fro();
      if (nrm <= 1e-14) continue;
      cand *= 1.0 / nrm;
      try {
        const double a = exact_alpha(cand);
        if (a < best_alpha) {
          best_alpha = a;
          g = cand;
        }
      } catch (const DegenerateChannelError&) {
        continue;
      }
    }
  }

  if (opts.mimo_polish_iters > 0) {
    // projected subgradient descent on the exact objective over the
    // unit-Frobenius sphere; the gradient of tr((G^H M G)^{-1}) with
    // respect to conj(G) is -M G S^{-2}
    std::vector<CMatrix> mm(n_dev);
    for (std::size_t n = 0; n < n_dev; ++n) mm[n] = ch.gains[n] * ch.gains[n].adjoint();
    CMatrix best_g = g;
    double best_alpha = exact_alpha(g);
    CMatrix cur = g;
    for (int k = 1; k <= opts.mimo_polish_iters; ++k) {
      double alpha = 0.0;
      std::size_t star = 0;
      CMatrix star_inv;
      bool degenerate = false;
      for (std::size_t n = 0; n < n_dev; ++n) {
        const CMatrix eff = cur.adjoint() * ch.gains[n];
        const HermEig ge = hermitian_eig(eff * eff.adjoint());
        if (ge.values.front() <= 1e-10) {
          degenerate = true;
          break;
        }
        double tri = 0.0;
        for (double lam : ge.values) tri += 1.0 / lam;
        const double val = prof.payload_symbols / static_cast<double>(streams) * tri / res[n];
        if (val > alpha) {
          alpha = val;
          star = n;
          CMatrix inv(streams, streams);
          for (std::size_t i = 0; i < streams; ++i)
            for (std::size_t j = 0; j < streams; ++j) {
              cplx s = 0.0;
              for (std::size_t kk = 0; kk < streams; ++kk)
                s += ge.vectors(i, kk) * std::conj(ge.vectors(j, kk)) /
                     (ge.values[kk] * ge.values[kk]);
              inv(i, j) = s;
            }
          star_inv = std::move(inv);  // S^{-2}
        }
      }
      if (degenerate) break;
      if (alpha < best_alpha) {
        best_alpha = alpha;
        best_g = cur;
      }
      CMatrix grad = mm[star] * cur * star_inv;
      grad *= cplx{-prof.payload_symbols / (static_cast<double>(streams) * res[star]), 0.0};
      const double gnorm = grad.norm_fro();
      if (gnorm <= 1e-300) break;
      const double step = 0.5 / (std::sqrt(static_cast<double>(k)) * gnorm);
      cur = cur - step * grad;
      const double cn = cur.norm_fro();
      if (cn <= 1e-14) break;
      cur *= 1.0 / cn;
    }
    g = best_g;
  }

  TransceiverSolution sol;
  sol.mimo = true;
  sol.beamformer = g;
  sol.scale = exact_alpha(g);
  sol.precoders_mimo = zf_precoders_mimo(sol.aggregation_beamformer(), ch);
  sol.analytic_mse = opts.sigma2 * sol.scale;
  sol.active_weights = std::move(active_weights);
  return sol;
}

// Dispatch on the channel's antenna configuration.
inline TransceiverSolution solve_short_term(const AssignmentPolicy& m, const DeviceProfile& prof,
                                            const ChannelSample& ch,
                                            const ShortTermOpts& opts = {}) {
  return ch.device_antennas() == 1 && prof.symbols_per_round == 1
             ? solve_short_term_scalar(m, prof, ch, opts)
             : solve_short_term_mimo(m, prof, ch, opts);
}

}  // namespace airtp
