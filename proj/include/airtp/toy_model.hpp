#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "airtp/error.hpp"
#include "airtp/rng.hpp"
#include "airtp/tensor.hpp"

namespace airtp {

enum class Activation { relu, gelu };

// A small pre-norm decoder-only transformer. It exists to make the
// accuracy metrics of a noisy all-reduce meaningful; there is nothing
// clever about the architecture itself.
struct ToyModelConfig {
  std::size_t d_model = 64;
  std::size_t d_hidden = 128;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t vocab_size = 128;
  std::size_t max_seq = 128;
  Activation activation = Activation::relu;
  std::uint64_t seed = 1;

  void validate() const {
    if (d_model < 1 || d_hidden < 1 || n_heads < 1 || n_layers < 1 || vocab_size < 1 ||
        max_seq < 1)
      throw DomainError("ToyModelConfig: all counts must be >= 1");
    if (d_model % n_heads != 0)
      throw DomainError("ToyModelConfig: d_model must be divisible by n_heads");
  }

  std::size_t head_dim() const { return d_model / n_heads; }
};

inline double activate(double x, Activation act) {
  if (act == Activation::relu) return x > 0.0 ? x : 0.0;
  return x * 0.5 * std::erfc(-x / std::numbers::sqrt2);  // x * Phi(x)
}

inline double activate_grad(double x, Activation act) {
  if (act == Activation::relu) return x > 0.0 ? 1.0 : 0.0;
  const double phi_cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double phi_pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return phi_cdf + x * phi_pdf;
}

struct LayerWeights {
  RMatrix q, k, v;    // d x d, head h occupies columns [h*dk, (h+1)*dk)
  RMatrix u_attn;     // d x d, rows follow the same head blocks
  RMatrix w_mlp;      // d x d_hidden
  RMatrix u_mlp;      // d_hidden x d
  std::vector<double> norm_attn;  // RMS gains, length d
  std::vector<double> norm_mlp;
};

struct ToyModel {
  ToyModelConfig cfg;
  RMatrix embedding;      // vocab x d
  RMatrix positional;     // max_seq x d
  std::vector<LayerWeights> layers;
  std::vector<double> norm_final;
  RMatrix output_proj;    // d x vocab

  static ToyModel init(const ToyModelConfig& cfg) {
    cfg.validate();
    ToyModel m;
    m.cfg = cfg;
    Rng rng(cfg.seed);
    const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    m.embedding = gaussian_matrix(cfg.vocab_size, cfg.d_model, sd, rng);
    m.positional = gaussian_matrix(cfg.max_seq, cfg.d_model, sd, rng);
    m.layers.resize(cfg.n_layers);
    for (LayerWeights& lw : m.layers) {
      lw.q = gaussian_matrix(cfg.d_model, cfg.d_model, sd, rng);
      lw.k = gaussian_matrix(cfg.d_model, cfg.d_model, sd, rng);
      lw.v = gaussian_matrix(cfg.d_model, cfg.d_model, sd, rng);
      lw.u_attn = gaussian_matrix(cfg.d_model, cfg.d_model, sd, rng);
      lw.w_mlp = gaussian_matrix(cfg.d_model, cfg.d_hidden, sd, rng);
      lw.u_mlp = gaussian_matrix(cfg.d_hidden, cfg.d_model,
                                 1.0 / std::sqrt(static_cast<double>(cfg.d_hidden)), rng);
      lw.norm_attn.assign(cfg.d_model, 1.0);
      lw.norm_mlp.assign(cfg.d_model, 1.0);
    }
    m.norm_final.assign(cfg.d_model, 1.0);
    m.output_proj = gaussian_matrix(cfg.d_model, cfg.vocab_size, sd, rng);
    return m;
  }
};

namespace detail {

constexpr double kRmsEps = 1e-8;

inline RMatrix rmsnorm(const RMatrix& x, const std::vector<double>& gain) {
  RMatrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double ms = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) ms += x(i, j) * x(i, j);
    const double inv = 1.0 / std::sqrt(ms / static_cast<double>(x.cols()) + kRmsEps);
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(i, j) * inv * gain[j];
  }
  return y;
}

// Causal row softmax of scores in place.
inline void causal_softmax(RMatrix& s) {
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double mx = -1e300;
    for (std::size_t j = 0; j <= i; ++j) mx = std::max(mx, s(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      s(i, j) = std::exp(s(i, j) - mx);
      z += s(i, j);
    }
    for (std::size_t j = 0; j <= i; ++j) s(i, j) /= z;
    for (std::size_t j = i + 1; j < s.cols(); ++j) s(i, j) = 0.0;
  }
}

// Multi-head causal attention over an arbitrary head range
// [head0, head0 + n_heads_local). The output projection uses the
// matching row block of u_attn, so summing the results over a head
// partition reproduces the full attention output.
inline RMatrix attention_heads(const RMatrix& a, const RMatrix& q_w, const RMatrix& k_w,
                               const RMatrix& v_w, const RMatrix& u_attn, std::size_t head_dim) {
  const std::size_t seq = a.rows();
  const std::size_t local_width = q_w.cols();
  const std::size_t n_local = local_width / head_dim;
  RMatrix concat(seq, local_width);
  const RMatrix qs = matmul(a, q_w);
  const RMatrix ks = matmul(a, k_w);
  const RMatrix vs = matmul(a, v_w);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (std::size_t h = 0; h < n_local; ++h) {
    const std::size_t c0 = h * head_dim;
    RMatrix scores(seq, seq);
    for (std::size_t i = 0; i < seq; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < head_dim; ++t) s += qs(i, c0 + t) * ks(j, c0 + t);
        scores(i, j) = s * inv_sqrt;
      }
    causal_softmax(scores);
    for (std::size_t i = 0; i < seq; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double p = scores(i, j);
        if (p == 0.0) continue;
        for (std::size_t t = 0; t < head_dim; ++t) concat(i, c0 + t) += p * vs(j, c0 + t);
      }
  }
  return matmul(concat, u_attn);
}

}  // namespace detail

// Centralized forward pass: logits for every position.
inline RMatrix toy_forward(const ToyModel& model, const std::vector<std::size_t>& tokens) {
  const ToyModelConfig& cfg = model.cfg;
  const std::size_t seq = tokens.size();
  if (seq == 0 || seq > cfg.max_seq) throw DomainError("toy_forward: bad sequence length");
  RMatrix x(seq, cfg.d_model);
  for (std::size_t i = 0; i < seq; ++i) {
    if (tokens[i] >= cfg.vocab_size) throw DomainError("toy_forward: token outside vocabulary");
    for (std::size_t j = 0; j < cfg.d_model; ++j)
      x(i, j) = model.embedding(tokens[i], j) + model.positional(i, j);
  }
  for (const LayerWeights& lw : model.layers) {
    const RMatrix a = detail::rmsnorm(x, lw.norm_attn);
    x += detail::attention_heads(a, lw.q, lw.k, lw.v, lw.u_attn, cfg.head_dim());
    const RMatrix b = detail::rmsnorm(x, lw.norm_mlp);
    RMatrix h = matmul(b, lw.w_mlp);
    for (double& v : h.raw()) v = activate(v, cfg.activation);
    x += matmul(h, lw.u_mlp);
  }
  const RMatrix y = detail::rmsnorm(x, model.norm_final);
  return matmul(y, model.output_proj);
}

// --- next-token metrics -----------------------------------------------------

struct PerplexityResult {
  double value = 0.0;
  bool clamped = false;  // some target token had probability below 1e-12
};

// exp of the average negative log-likelihood of each next token.
// logits row k scores the prediction of tokens[k+1].
inline PerplexityResult perplexity(const RMatrix& logits, const std::vector<std::size_t>& tokens) {
  if (tokens.size() != logits.rows())
    throw DimensionError("perplexity: token count must match logit rows");
  if (tokens.size() < 2) throw DomainError("perplexity: need at least two tokens");
  PerplexityResult out;
  double nll = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k + 1 < tokens.size(); ++k) {
    double mx = -1e300;
    for (std::size_t j = 0; j < logits.cols(); ++j) mx = std::max(mx, logits(k, j));
    double z = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) z += std::exp(logits(k, j) - mx);
    double p = std::exp(logits(k, tokens[k + 1]) - mx) / z;
    if (p < 1e-12) {
      p = 1e-12;
      out.clamped = true;
    }
    nll -= std::log(p);
    ++count;
  }
  out.value = std::exp(nll / static_cast<double>(count));
  return out;
}

struct LogitDeviation {
  double mse = 0.0;
  double mean_kl = 0.0;
};

// Element-wise MSE plus the mean KL divergence between softmaxed rows,
// KL(clean || noisy).
inline LogitDeviation logit_deviation(const RMatrix& clean, const RMatrix& noisy) {
  if (clean.rows() != noisy.rows() || clean.cols() != noisy.cols())
    throw DimensionError("logit_deviation: shape mismatch");
  LogitDeviation out;
  const std::size_t n = clean.size();
  std::vector<double> pc(clean.cols()), pn(clean.cols());
  for (std::size_t i = 0; i < clean.rows(); ++i) {
    double mxc = -1e300, mxn = -1e300;
    for (std::size_t j = 0; j < clean.cols(); ++j) {
      const double d = clean(i, j) - noisy(i, j);
      out.mse += d * d / static_cast<double>(n);
      mxc = std::max(mxc, clean(i, j));
      mxn = std::max(mxn, noisy(i, j));
    }
    double zc = 0.0, zn = 0.0;
    for (std::size_t j = 0; j < clean.cols(); ++j) {
      pc[j] = std::exp(clean(i, j) - mxc);
      pn[j] = std::exp(noisy(i, j) - mxn);
      zc += pc[j];
      zn += pn[j];
    }
    double kl = 0.0;
    for (std::size_t j = 0; j < clean.cols(); ++j) {
      const double a = pc[j] / zc;
      const double b = std::max(pn[j] / zn, 1e-300);
      if (a > 0.0) kl += a * std::log(a / b);
    }
    out.mean_kl += std::max(kl, 0.0) / static_cast<double>(clean.rows());
  }
  return out;
}

}  // namespace airtp
