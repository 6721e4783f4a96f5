#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "airtp/error.hpp"
#include "airtp/tp_runtime.hpp"
#include "airtp/transceiver.hpp"

namespace airtp {

// Closed-form transmission-time inputs shared by the three schemes.
struct LatencyConfig {
  double bandwidth_hz = 1e7;
  int quant_bits = 8;
  double snr_rx = 10.0;  // linear
  double payload_symbols = 4096.0;  // entries per all-reduce
  std::size_t allreduces_per_layer = 2;
  std::size_t n_layers = 32;
  std::vector<double> compute_rate;  // weights per second, per device

  void validate() const {
    if (bandwidth_hz <= 0.0) throw DomainError("LatencyConfig: bandwidth must be positive");
    if (quant_bits < 1) throw DomainError("LatencyConfig: quant_bits must be >= 1");
    if (snr_rx <= 0.0) throw DomainError("LatencyConfig: snr_rx must be positive");
    if (payload_symbols <= 0.0) throw DomainError("LatencyConfig: payload must be positive");
    if (allreduces_per_layer < 1 || n_layers < 1)
      throw DomainError("LatencyConfig: layer counts must be >= 1");
    if (compute_rate.empty()) throw DomainError("LatencyConfig: compute_rate empty");
    for (double r : compute_rate)
      if (r <= 0.0) throw DomainError("LatencyConfig: compute rates must be positive");
  }
};

// Time for one all-reduce transmission round.
//   digital: N L0 Q / (B log2(1 + snr N))
//   fdma:    N L0 / B
//   aircomp: L0 / B
inline double transmission_time(AllReduceKind scheme, std::size_t n_devices,
                                const LatencyConfig& cfg) {
  cfg.validate();
  const double n = static_cast<double>(n_devices);
  switch (scheme) {
    case AllReduceKind::digital:
      return n * cfg.payload_symbols * static_cast<double>(cfg.quant_bits) /
             (cfg.bandwidth_hz * std::log2(1.0 + cfg.snr_rx * n));
    case AllReduceKind::fdma:
      return n * cfg.payload_symbols / cfg.bandwidth_hz;
    case AllReduceKind::aircomp:
      return cfg.payload_symbols / cfg.bandwidth_hz;
    case AllReduceKind::ideal:
      return 0.0;
  }
  throw DomainError("transmission_time: unknown scheme");
}

struct PerTokenTime {
  double compute_s = 0.0;
  double comm_s = 0.0;
  double total_s = 0.0;
};

// Per-token latency: devices compute their shards in parallel (the
// slowest dominates each layer) and synchronize at every all-reduce.
inline PerTokenTime per_token_time(const AssignmentPolicy& m, AllReduceKind scheme,
                                   double params_per_layer, const LatencyConfig& cfg) {
  cfg.validate();
  if (m.size() != cfg.compute_rate.size())
    throw DimensionError("per_token_time: assignment/rate length mismatch");
  double slowest = 0.0;
  for (std::size_t n = 0; n < m.size(); ++n)
    slowest = std::max(slowest, m.m[n] * params_per_layer / cfg.compute_rate[n]);
  PerTokenTime t;
  t.compute_s = static_cast<double>(cfg.n_layers) * slowest;
  t.comm_s = static_cast<double>(cfg.n_layers) * static_cast<double>(cfg.allreduces_per_layer) *
             transmission_time(scheme, m.size(), cfg);
  t.total_s = t.compute_s + t.comm_s;
  return t;
}

// Per-device energy per layer: compute plus communication.
inline std::vector<double> energy_usage(const AssignmentPolicy& m,
                                        const TransceiverSolution& sol,
                                        const DeviceProfile& prof) {
  if (m.size() != prof.n_devices()) throw DimensionError("energy_usage: length mismatch");
  std::vector<double> e(m.size());
  for (std::size_t n = 0; n < m.size(); ++n) {
    double comm;
    if (!sol.mimo) {
      comm = prof.payload_symbols * std::norm(sol.precoders_scalar[n]);
    } else {
      const CMatrix& b = sol.precoders_mimo[n];
      comm = prof.payload_symbols / static_cast<double>(prof.symbols_per_round) *
             b.norm_fro() * b.norm_fro();
    }
    e[n] = prof.energy_coeff[n] * m.m[n] * prof.params_per_layer + comm;
  }
  return e;
}

}  // namespace airtp
