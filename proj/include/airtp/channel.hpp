#pragma once

#include <cstddef>
#include <vector>

#include "airtp/cmatrix.hpp"
#include "airtp/error.hpp"
#include "airtp/rng.hpp"

namespace airtp {

// Uplink fading statistics and system dimensions. Rician fading enters
// as a shifted complex Gaussian: every entry ~ mean + CN(0, variance).
struct ChannelConfig {
  std::size_t n_devices = 4;
  std::size_t server_antennas = 16;
  std::size_t device_antennas = 1;  // 1 selects the scalar signal model
  cplx rician_mean{1.0, 0.0};
  double rician_variance = 1.0;
  double noise_power = 1.0;  // sigma^2 at the server

  void validate() const {
    if (n_devices < 1) throw DomainError("ChannelConfig: n_devices must be >= 1");
    if (server_antennas < 1) throw DomainError("ChannelConfig: server_antennas must be >= 1");
    if (device_antennas < 1) throw DomainError("ChannelConfig: device_antennas must be >= 1");
    if (rician_variance < 0.0) throw DomainError("ChannelConfig: rician_variance must be >= 0");
    if (noise_power < 0.0) throw DomainError("ChannelConfig: noise_power must be >= 0");
  }
};

// One block-fading realization: per device an N_r x N_t matrix (a column
// vector when N_t = 1).
struct ChannelSample {
  std::vector<CMatrix> gains;

  std::size_t n_devices() const { return gains.size(); }
  std::size_t server_antennas() const { return gains.empty() ? 0 : gains.front().rows(); }
  std::size_t device_antennas() const { return gains.empty() ? 0 : gains.front().cols(); }
};

inline ChannelSample sample_channel(const ChannelConfig& cfg, Rng& rng) {
  cfg.validate();
  ChannelSample s;
  s.gains.reserve(cfg.n_devices);
  for (std::size_t n = 0; n < cfg.n_devices; ++n)
    s.gains.push_back(sample_complex_gaussian(cfg.rician_mean, cfg.rician_variance,
                                              cfg.server_antennas, cfg.device_antennas, rng));
  return s;
}

}  // namespace airtp
