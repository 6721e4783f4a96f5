#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "airtp/channel.hpp"
#include "airtp/error.hpp"
#include "airtp/tensor.hpp"
#include "airtp/toy_model.hpp"
#include "airtp/transceiver.hpp"

namespace airtp {

// Largest-remainder apportionment of `total` units by the weights in m.
// Remainder ties resolve toward the lower device index.
inline std::vector<std::size_t> apportion(const std::vector<double>& m, std::size_t total) {
  const std::size_t n = m.size();
  std::vector<std::size_t> counts(n);
  std::vector<double> remainder(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = m[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(quota + 1e-12));
    remainder[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k) {
    counts[order[k % n]] += 1;
    ++assigned;
  }
  return counts;
}

// One device's slices of one transformer layer.
struct LayerShard {
  RMatrix q, k, v;    // d x (heads * dk)
  RMatrix u_attn;     // (heads * dk) x d
  RMatrix w_mlp;      // d x cols
  RMatrix u_mlp;      // cols x d
};

// Per-device slices of the partitioned weight matrices. Hidden columns
// and attention heads are assigned as contiguous blocks sized by
// largest-remainder apportionment of the assignment fractions.
struct ModelShards {
  std::size_t n_devices = 0;
  std::size_t head_dim = 0;
  Activation activation = Activation::relu;
  std::vector<std::size_t> mlp_cols;    // per device
  std::vector<std::size_t> head_count;  // per device
  std::vector<std::vector<LayerShard>> device_layers;  // [device][layer]
};

inline ModelShards partition_model(const ToyModel& model, const AssignmentPolicy& m,
                                   std::size_t n_devices) {
  m.validate();
  if (m.size() != n_devices) throw DimensionError("partition_model: assignment length mismatch");
  const ToyModelConfig& cfg = model.cfg;
  if (n_devices > cfg.d_hidden || n_devices > cfg.n_heads)
    throw PartitionError("partition_model: more devices than hidden columns or heads");

  ModelShards shards;
  shards.n_devices = n_devices;
  shards.head_dim = cfg.head_dim();
  shards.activation = cfg.activation;
  shards.mlp_cols = apportion(m.m, cfg.d_hidden);
  shards.head_count = apportion(m.m, cfg.n_heads);
  shards.device_layers.resize(n_devices);

  std::size_t col0 = 0, head0 = 0;
  for (std::size_t dev = 0; dev < n_devices; ++dev) {
    const std::size_t col1 = col0 + shards.mlp_cols[dev];
    const std::size_t a0 = head0 * shards.head_dim;
    const std::size_t a1 = (head0 + shards.head_count[dev]) * shards.head_dim;
    shards.device_layers[dev].reserve(cfg.n_layers);
    for (const LayerWeights& lw : model.layers) {
      LayerShard s;
      s.q = lw.q.cols_block(a0, a1);
      s.k = lw.k.cols_block(a0, a1);
      s.v = lw.v.cols_block(a0, a1);
      s.u_attn = lw.u_attn.rows_block(a0, a1);
      s.w_mlp = lw.w_mlp.cols_block(col0, col1);
      s.u_mlp = lw.u_mlp.rows_block(col0, col1);
      shards.device_layers[dev].push_back(std::move(s));
    }
    col0 = col1;
    head0 += shards.head_count[dev];
  }
  return shards;
}

// Local MLP partial: act(X W_n) U_n. Devices holding no columns
// contribute zero.
inline RMatrix mlp_forward_local(const RMatrix& x, const ModelShards& shards, std::size_t dev,
                                 std::size_t layer) {
  const LayerShard& s = shards.device_layers[dev][layer];
  if (s.w_mlp.cols() == 0) return RMatrix(x.rows(), x.cols());
  RMatrix h = matmul(x, s.w_mlp);
  for (double& v : h.raw()) v = activate(v, shards.activation);
  return matmul(h, s.u_mlp);
}

// Local attention partial over the device's own heads. Devices holding
// no heads contribute zero.
inline RMatrix attn_forward_local(const RMatrix& x, const ModelShards& shards, std::size_t dev,
                                  std::size_t layer) {
  const LayerShard& s = shards.device_layers[dev][layer];
  if (s.q.cols() == 0) return RMatrix(x.rows(), x.cols());
  return detail::attention_heads(x, s.q, s.k, s.v, s.u_attn, shards.head_dim);
}

// --- all-reduce backends -----------------------------------------------------

enum class AllReduceKind { ideal, aircomp, digital, fdma };

// Aggregation channel model for the all-reduce step. The analog kinds
// transmit pairs of real entries as one complex symbol, normalized by a
// single shared scale (the standard deviation of the stacked partials)
// that the server inverts after combining.
struct AllReduceBackend {
  AllReduceKind kind = AllReduceKind::ideal;
  std::optional<TransceiverSolution> transceiver;  // aircomp
  std::optional<ChannelSample> channel;            // aircomp, fdma
  double sigma2 = 0.0;
  int quant_bits = 8;                 // digital
  std::vector<double> tx_power;       // fdma per-symbol transmit power
  Rng rng{0};

  static AllReduceBackend make_ideal() { return AllReduceBackend{}; }

  static AllReduceBackend make_aircomp(TransceiverSolution sol, ChannelSample ch, double sigma2,
                                       std::uint64_t seed) {
    if (sol.mimo)
      throw DomainError("AllReduceBackend: aircomp runtime uses the scalar signal model");
    AllReduceBackend b;
    b.kind = AllReduceKind::aircomp;
    b.transceiver = std::move(sol);
    b.channel = std::move(ch);
    b.sigma2 = sigma2;
    b.rng = Rng(seed);
    return b;
  }

  static AllReduceBackend make_digital(int bits) {
    if (bits < 1) throw DomainError("AllReduceBackend: quant_bits must be >= 1");
    AllReduceBackend b;
    b.kind = AllReduceKind::digital;
    b.quant_bits = bits;
    return b;
  }

  // Uncoded FDMA with per-device maximum-ratio reception; every device
  // spends its full residual budget on its dedicated sub-channel.
  static AllReduceBackend make_fdma(const AssignmentPolicy& m, const DeviceProfile& prof,
                                    ChannelSample ch, double sigma2, std::uint64_t seed) {
    AllReduceBackend b;
    b.kind = AllReduceKind::fdma;
    const std::vector<double> res = residual_power(m, prof);
    b.tx_power.resize(res.size());
    for (std::size_t n = 0; n < res.size(); ++n) b.tx_power[n] = res[n] / prof.payload_symbols;
    b.channel = std::move(ch);
    b.sigma2 = sigma2;
    b.rng = Rng(seed);
    return b;
  }
};

namespace detail {

inline double stacked_std(const std::vector<RMatrix>& parts) {
  double sum = 0.0, sumsq = 0.0;
  std::size_t count = 0;
  for (const RMatrix& p : parts) {
    for (double v : p.raw()) {
      sum += v;
      sumsq += v * v;
    }
    count += p.size();
  }
  if (count == 0) return 1.0;
  const double mean = sum / static_cast<double>(count);
  const double var = std::max(0.0, sumsq / static_cast<double>(count) - mean * mean);
  const double sd = std::sqrt(var);
  return sd > 0.0 ? sd : 1.0;
}

}  // namespace detail

// Sums per-device partials through the configured aggregation channel.
inline RMatrix all_reduce(const std::vector<RMatrix>& parts, AllReduceBackend& backend) {
  if (parts.empty()) throw DimensionError("all_reduce: no partials");
  const std::size_t rows = parts.front().rows();
  const std::size_t cols = parts.front().cols();
  for (const RMatrix& p : parts)
    if (p.rows() != rows || p.cols() != cols)
      throw DimensionError("all_reduce: partial shapes disagree");
  const std::size_t n_dev = parts.size();
  const std::size_t count = rows * cols;

  switch (backend.kind) {
    case AllReduceKind::ideal: {
      RMatrix out(rows, cols);
      for (const RMatrix& p : parts) out += p;
      return out;
    }
    case AllReduceKind::digital: {
      // per-device uniform mid-rise quantization over the observed range
      RMatrix out(rows, cols);
      const double levels = std::pow(2.0, backend.quant_bits);
      for (const RMatrix& p : parts) {
        double lo = p.raw().empty() ? 0.0 : p.raw()[0], hi = lo;
        for (double v : p.raw()) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        const double delta = (hi - lo) / levels;
        for (std::size_t i = 0; i < count; ++i) {
          const double v = p.raw()[i];
          double q = v;
          if (delta > 0.0) {
            double idx = std::floor((v - lo) / delta);
            idx = std::clamp(idx, 0.0, levels - 1.0);
            q = lo + (idx + 0.5) * delta;
          }
          out.raw()[i] += q;
        }
      }
      return out;
    }
    case AllReduceKind::aircomp: {
      if (!backend.transceiver || !backend.channel)
        throw DomainError("all_reduce: aircomp backend needs transceiver and channel");
      const TransceiverSolution& sol = *backend.transceiver;
      const ChannelSample& ch = *backend.channel;
      if (ch.n_devices() != n_dev)
        throw DimensionError("all_reduce: channel device count mismatch");
      const CMatrix a = sol.aggregation_beamformer();
      std::vector<cplx> gain(n_dev);
      for (std::size_t n = 0; n < n_dev; ++n)
        gain[n] = vdot(a, ch.gains[n].col(0)) * sol.precoders_scalar[n];
      const double noise_var = backend.sigma2 * norm2_sq(a);
      const double scale = detail::stacked_std(parts);
      const double sym_scale = scale * std::numbers::sqrt2;

      RMatrix out(rows, cols);
      for (std::size_t i = 0; i < count; i += 2) {
        cplx acc{0.0, 0.0};
        for (std::size_t n = 0; n < n_dev; ++n) {
          const double re = parts[n].raw()[i];
          const double im = (i + 1 < count) ? parts[n].raw()[i + 1] : 0.0;
          acc += gain[n] * (cplx{re, im} / sym_scale);
        }
        acc += backend.rng.complex_normal({0.0, 0.0}, noise_var);
        out.raw()[i] = acc.real() * sym_scale;
        if (i + 1 < count) out.raw()[i + 1] = acc.imag() * sym_scale;
      }
      return out;
    }
    case AllReduceKind::fdma: {
      if (!backend.channel || backend.tx_power.size() != n_dev)
        throw DomainError("all_reduce: fdma backend needs channel and per-device power");
      const ChannelSample& ch = *backend.channel;
      const double scale = detail::stacked_std(parts);
      const double sym_scale = scale * std::numbers::sqrt2;
      // after maximum-ratio combining, each device contributes an
      // independent error of variance sigma^2 / (p_n |h_n|^2)
      std::vector<double> err_var(n_dev);
      for (std::size_t n = 0; n < n_dev; ++n) {
        const double hsq = norm2_sq(ch.gains[n].col(0));
        if (hsq <= 0.0) throw DegenerateChannelError("all_reduce: fdma channel is zero");
        err_var[n] = backend.sigma2 / (backend.tx_power[n] * hsq);
      }
      RMatrix out(rows, cols);
      for (std::size_t i = 0; i < count; i += 2) {
        cplx acc{0.0, 0.0};
        for (std::size_t n = 0; n < n_dev; ++n) {
          const double re = parts[n].raw()[i];
          const double im = (i + 1 < count) ? parts[n].raw()[i + 1] : 0.0;
          acc += cplx{re, im} / sym_scale + backend.rng.complex_normal({0.0, 0.0}, err_var[n]);
        }
        out.raw()[i] = acc.real() * sym_scale;
        if (i + 1 < count) out.raw()[i + 1] = acc.imag() * sym_scale;
      }
      return out;
    }
  }
  throw DomainError("all_reduce: unknown backend kind");
}

// Distributed forward pass: per-device local partials with an all-reduce
// after the attention and MLP blocks of every layer. The aggregated
// activations are broadcast identically to every device, so the residual
// and normalization steps run once on the aggregate.
inline RMatrix model_forward(const ToyModel& model, const std::vector<std::size_t>& tokens,
                             const ModelShards& shards, AllReduceBackend& backend) {
  const ToyModelConfig& cfg = model.cfg;
  const std::size_t seq = tokens.size();
  if (seq == 0 || seq > cfg.max_seq) throw DomainError("model_forward: bad sequence length");
  RMatrix x(seq, cfg.d_model);
  for (std::size_t i = 0; i < seq; ++i) {
    if (tokens[i] >= cfg.vocab_size) throw DomainError("model_forward: token outside vocabulary");
    for (std::size_t j = 0; j < cfg.d_model; ++j)
      x(i, j) = model.embedding(tokens[i], j) + model.positional(i, j);
  }
  std::vector<RMatrix> parts(shards.n_devices);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const RMatrix a = detail::rmsnorm(x, model.layers[l].norm_attn);
    for (std::size_t dev = 0; dev < shards.n_devices; ++dev)
      parts[dev] = attn_forward_local(a, shards, dev, l);
    x += all_reduce(parts, backend);
    const RMatrix b = detail::rmsnorm(x, model.layers[l].norm_mlp);
    for (std::size_t dev = 0; dev < shards.n_devices; ++dev)
      parts[dev] = mlp_forward_local(b, shards, dev, l);
    x += all_reduce(parts, backend);
  }
  const RMatrix y = detail::rmsnorm(x, model.norm_final);
  return matmul(y, model.output_proj);
}

}  // namespace airtp
