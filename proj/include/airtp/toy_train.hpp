#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "airtp/error.hpp"
#include "airtp/toy_model.hpp"

namespace airtp {

// Public-domain training snippet (Lewis Carroll, "Alice's Adventures in
// Wonderland", 1865, chapter I).
inline std::string_view bundled_corpus() {
  return R"(Alice was beginning to get very tired of sitting by her sister on the
bank, and of having nothing to do: once or twice she had peeped into
the book her sister was reading, but it had no pictures or
conversations in it, "and what is the use of a book," thought Alice
"without pictures or conversations?"

So she was considering in her own mind (as well as she could, for the
hot day made her feel very sleepy and stupid), whether the pleasure of
making a daisy-chain would be worth the trouble of getting up and
picking the daisies, when suddenly a White Rabbit with pink eyes ran
close by her.

There was nothing so very remarkable in that; nor did Alice think it
so very much out of the way to hear the Rabbit say to itself, "Oh
dear! Oh dear! I shall be late!" (when she thought it over afterwards,
it occurred to her that she ought to have wondered at this, but at the
time it all seemed quite natural); but when the Rabbit actually took a
watch out of its waistcoat-pocket, and looked at it, and then hurried
on, Alice started to her feet, for it flashed across her mind that she
had never before seen a rabbit with either a waistcoat-pocket, or a
watch to take out of it, and burning with curiosity, she ran across
the field after it, and fortunately was just in time to see it pop
down a large rabbit-hole under the hedge.

In another moment down went Alice after it, never once considering how
in the world she was to get out again.

The rabbit-hole went straight on like a tunnel for some way, and then
dipped suddenly down, so suddenly that Alice had not a moment to think
about stopping herself before she found herself falling down a very
deep well.

Either the well was very deep, or she fell very slowly, for she had
plenty of time as she went down to look about her and to wonder what
was going to happen next. First, she tried to look down and make out
what she was coming to, but it was too dark to see anything; then she
looked at the sides of the well, and noticed that they were filled
with cupboards and book-shelves; here and there she saw maps and
pictures hung upon pegs. She took down a jar from one of the shelves
as she passed; it was labelled "ORANGE MARMALADE", but to her great
disappointment it was empty: she did not like to drop the jar for fear
of killing somebody, so managed to put it into one of the cupboards as
she fell past it.

"Well!" thought Alice to herself, "after such a fall as this, I shall
think nothing of tumbling down stairs! How brave they'll all think me
at home! Why, I wouldn't say anything about it, even if I fell off the
top of the house!" (Which was very likely true.)

Down, down, down. Would the fall never come to an end! "I wonder how
many miles I've fallen by this time?" she said aloud. "I must be
getting somewhere near the centre of the earth. Let me see: that would
be four thousand miles down, I think--" (for, you see, Alice had
learnt several things of this sort in her lessons in the schoolroom,
and though this was not a very good opportunity for showing off her
knowledge, as there was no one to listen to her, still it was good
practice to say it over) "--yes, that's about the right distance--but
then I wonder what Latitude or Longitude I've got to?" (Alice had no
idea what Latitude was, or Longitude either, but thought they were
nice grand words to say.)

Presently she began again. "I wonder if I shall fall right through the
earth! How funny it'll seem to come out among the people that walk
with their heads downward! The Antipathies, I think--" (she was rather
glad there was no one listening, this time, as it didn't sound at all
the right word) "--but I shall have to ask them what the name of the
country is, you know. Please, Ma'am, is this New Zealand or Australia?"
(and she tried to curtsey as she spoke--fancy curtseying as you're
falling through the air! Do you think you could manage it?) "And what
an ignorant little girl she'll think me for asking! No, it'll never do
to ask: perhaps I shall see it written up somewhere."

Down, down, down. There was nothing else to do, so Alice soon began
talking again. "Dinah'll miss me very much to-night, I should think!"
(Dinah was the cat.) "I hope they'll remember her saucer of milk at
tea-time. Dinah my dear! I wish you were down here with me! There are
no mice in the air, I'm afraid, but you might catch a bat, and that's
very like a mouse, you know. But do cats eat bats, I wonder?" And here
Alice began to get rather sleepy, and went on saying to herself, in a
dreamy sort of way, "Do cats eat bats? Do cats eat bats?" and
sometimes, "Do bats eat cats?" for, you see, as she couldn't answer
either question, it didn't much matter which way she put it.
)";
}

// Byte-level vocabulary over a text: distinct bytes, ids in byte order.
struct CharVocab {
  std::vector<unsigned char> id_to_byte;
  std::map<unsigned char, std::size_t> byte_to_id;

  static CharVocab build(std::string_view text, std::size_t cap = 128) {
    bool seen[256] = {};
    for (unsigned char c : text) seen[c] = true;
    CharVocab v;
    for (int c = 0; c < 256; ++c)
      if (seen[c]) {
        v.byte_to_id[static_cast<unsigned char>(c)] = v.id_to_byte.size();
        v.id_to_byte.push_back(static_cast<unsigned char>(c));
      }
    if (v.id_to_byte.size() > cap)
      throw DomainError("CharVocab: corpus alphabet exceeds the vocabulary cap");
    return v;
  }

  std::vector<std::size_t> encode(std::string_view text) const {
    std::vector<std::size_t> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) {
      const auto it = byte_to_id.find(c);
      if (it == byte_to_id.end()) throw DomainError("CharVocab: byte outside vocabulary");
      ids.push_back(it->second);
    }
    return ids;
  }

  std::size_t size() const { return id_to_byte.size(); }
};

namespace detail {

struct LayerCache {
  RMatrix x_in, a, qs, ks, vs, concat, x_mid, b, pre, h;
  std::vector<RMatrix> probs;  // per head
};

struct ForwardCache {
  RMatrix x0;
  std::vector<LayerCache> layers;
  RMatrix x_last, y, logits;
};

inline void rmsnorm_backward(const RMatrix& x, const std::vector<double>& gain,
                             const RMatrix& dy, RMatrix& dx, std::vector<double>& dgain) {
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double ms = 0.0;
    for (std::size_t j = 0; j < d; ++j) ms += x(i, j) * x(i, j);
    const double r = std::sqrt(ms / static_cast<double>(d) + kRmsEps);
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += dy(i, j) * gain[j] * x(i, j);
    const double scale = dot / (static_cast<double>(d) * r * r * r);
    for (std::size_t j = 0; j < d; ++j) {
      dx(i, j) += dy(i, j) * gain[j] / r - x(i, j) * scale;
      dgain[j] += dy(i, j) * x(i, j) / r;
    }
  }
}

inline ForwardCache toy_forward_cached(const ToyModel& model,
                                       const std::vector<std::size_t>& tokens) {
  const ToyModelConfig& cfg = model.cfg;
  const std::size_t seq = tokens.size();
  const std::size_t dk = cfg.head_dim();
  ForwardCache fc;
  fc.x0 = RMatrix(seq, cfg.d_model);
  for (std::size_t i = 0; i < seq; ++i)
    for (std::size_t j = 0; j < cfg.d_model; ++j)
      fc.x0(i, j) = model.embedding(tokens[i], j) + model.positional(i, j);
  RMatrix x = fc.x0;
  fc.layers.resize(cfg.n_layers);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const LayerWeights& lw = model.layers[l];
    LayerCache& lc = fc.layers[l];
    lc.x_in = x;
    lc.a = rmsnorm(x, lw.norm_attn);
    lc.qs = matmul(lc.a, lw.q);
    lc.ks = matmul(lc.a, lw.k);
    lc.vs = matmul(lc.a, lw.v);
    lc.concat = RMatrix(seq, cfg.d_model);
    lc.probs.resize(cfg.n_heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const std::size_t c0 = h * dk;
      RMatrix scores(seq, seq);
      for (std::size_t i = 0; i < seq; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < dk; ++t) s += lc.qs(i, c0 + t) * lc.ks(j, c0 + t);
          scores(i, j) = s * inv_sqrt;
        }
      causal_softmax(scores);
      for (std::size_t i = 0; i < seq; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          const double p = scores(i, j);
          for (std::size_t t = 0; t < dk; ++t) lc.concat(i, c0 + t) += p * lc.vs(j, c0 + t);
        }
      lc.probs[h] = std::move(scores);
    }
    x += matmul(lc.concat, lw.u_attn);
    lc.x_mid = x;
    lc.b = rmsnorm(x, lw.norm_mlp);
    lc.pre = matmul(lc.b, lw.w_mlp);
    lc.h = lc.pre;
    for (double& v : lc.h.raw()) v = activate(v, cfg.activation);
    x += matmul(lc.h, lw.u_mlp);
  }
  fc.x_last = x;
  fc.y = rmsnorm(x, model.norm_final);
  fc.logits = matmul(fc.y, model.output_proj);
  return fc;
}

struct ModelGrads {
  RMatrix embedding, positional, output_proj;
  std::vector<LayerWeights> layers;
  std::vector<double> norm_final;

  static ModelGrads zeros_like(const ToyModel& m) {
    ModelGrads g;
    g.embedding = RMatrix(m.embedding.rows(), m.embedding.cols());
    g.positional = RMatrix(m.positional.rows(), m.positional.cols());
    g.output_proj = RMatrix(m.output_proj.rows(), m.output_proj.cols());
    g.norm_final.assign(m.cfg.d_model, 0.0);
    g.layers.resize(m.cfg.n_layers);
    for (std::size_t l = 0; l < m.cfg.n_layers; ++l) {
      const LayerWeights& lw = m.layers[l];
      LayerWeights& gl = g.layers[l];
      gl.q = RMatrix(lw.q.rows(), lw.q.cols());
      gl.k = RMatrix(lw.k.rows(), lw.k.cols());
      gl.v = RMatrix(lw.v.rows(), lw.v.cols());
      gl.u_attn = RMatrix(lw.u_attn.rows(), lw.u_attn.cols());
      gl.w_mlp = RMatrix(lw.w_mlp.rows(), lw.w_mlp.cols());
      gl.u_mlp = RMatrix(lw.u_mlp.rows(), lw.u_mlp.cols());
      gl.norm_attn.assign(m.cfg.d_model, 0.0);
      gl.norm_mlp.assign(m.cfg.d_model, 0.0);
    }
    return g;
  }
};

// Cross-entropy loss against the next token, with gradients accumulated
// into `grads`. Returns the mean loss over predicted positions.
inline double toy_backward(const ToyModel& model, const std::vector<std::size_t>& tokens,
                           const ForwardCache& fc, ModelGrads& grads) {
  const ToyModelConfig& cfg = model.cfg;
  const std::size_t seq = tokens.size();
  const std::size_t preds = seq - 1;
  const std::size_t dk = cfg.head_dim();

  RMatrix dlogits(seq, cfg.vocab_size);
  double loss = 0.0;
  for (std::size_t i = 0; i + 1 < seq; ++i) {
    double mx = -1e300;
    for (std::size_t j = 0; j < cfg.vocab_size; ++j) mx = std::max(mx, fc.logits(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < cfg.vocab_size; ++j) z += std::exp(fc.logits(i, j) - mx);
    const std::size_t target = tokens[i + 1];
    loss -= (fc.logits(i, target) - mx - std::log(z)) / static_cast<double>(preds);
    for (std::size_t j = 0; j < cfg.vocab_size; ++j) {
      const double p = std::exp(fc.logits(i, j) - mx) / z;
      dlogits(i, j) = (p - (j == target ? 1.0 : 0.0)) / static_cast<double>(preds);
    }
  }

  grads.output_proj += matmul(fc.y, dlogits, true, false);
  RMatrix dy = matmul(dlogits, model.output_proj, false, true);
  RMatrix dx(seq, cfg.d_model);
  rmsnorm_backward(fc.x_last, model.norm_final, dy, dx, grads.norm_final);

  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const LayerWeights& lw = model.layers[l];
    const LayerCache& lc = fc.layers[l];
    LayerWeights& gl = grads.layers[l];

    // MLP block: x_out = x_mid + act(b W) U
    grads.layers[l].u_mlp += matmul(lc.h, dx, true, false);
    RMatrix dpre = matmul(dx, lw.u_mlp, false, true);
    for (std::size_t i = 0; i < dpre.size(); ++i)
      dpre.raw()[i] *= activate_grad(lc.pre.raw()[i], cfg.activation);
    gl.w_mlp += matmul(lc.b, dpre, true, false);
    const RMatrix db = matmul(dpre, lw.w_mlp, false, true);
    RMatrix dx_mid = dx;  // residual path
    rmsnorm_backward(lc.x_mid, lw.norm_mlp, db, dx_mid, gl.norm_mlp);

    // attention block: x_mid = x_in + attn(a) U_attn
    gl.u_attn += matmul(lc.concat, dx_mid, true, false);
    const RMatrix dconcat = matmul(dx_mid, lw.u_attn, false, true);
    RMatrix dqs(seq, cfg.d_model), dks(seq, cfg.d_model), dvs(seq, cfg.d_model);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const std::size_t c0 = h * dk;
      const RMatrix& p = lc.probs[h];
      for (std::size_t i = 0; i < seq; ++i) {
        // dP restricted to the causal support, then the softmax Jacobian
        double rowdot = 0.0;
        std::vector<double> dp(i + 1);
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < dk; ++t) s += dconcat(i, c0 + t) * lc.vs(j, c0 + t);
          dp[j] = s;
          rowdot += s * p(i, j);
        }
        for (std::size_t j = 0; j <= i; ++j) {
          const double ds = p(i, j) * (dp[j] - rowdot) * inv_sqrt;
          const double pij = p(i, j);
          for (std::size_t t = 0; t < dk; ++t) {
            dqs(i, c0 + t) += ds * lc.ks(j, c0 + t);
            dks(j, c0 + t) += ds * lc.qs(i, c0 + t);
            dvs(j, c0 + t) += pij * dconcat(i, c0 + t);
          }
        }
      }
    }
    gl.q += matmul(lc.a, dqs, true, false);
    gl.k += matmul(lc.a, dks, true, false);
    gl.v += matmul(lc.a, dvs, true, false);
    RMatrix da = matmul(dqs, lw.q, false, true);
    da += matmul(dks, lw.k, false, true);
    da += matmul(dvs, lw.v, false, true);
    RMatrix dx_in = dx_mid;  // residual path
    rmsnorm_backward(lc.x_in, lw.norm_attn, da, dx_in, gl.norm_attn);
    dx = std::move(dx_in);
  }

  for (std::size_t i = 0; i < seq; ++i)
    for (std::size_t j = 0; j < cfg.d_model; ++j) {
      grads.embedding(tokens[i], j) += dx(i, j);
      grads.positional(i, j) += dx(i, j);
    }
  return loss;
}

// Flattened parameter/gradient view for the optimizer.
inline void collect_params(ToyModel& m, ModelGrads& g, std::vector<double*>& params,
                           std::vector<double*>& grads, std::vector<std::size_t>& sizes) {
  const auto push = [&](std::vector<double>& p, std::vector<double>& gr) {
    params.push_back(p.data());
    grads.push_back(gr.data());
    sizes.push_back(p.size());
  };
  push(m.embedding.raw(), g.embedding.raw());
  push(m.positional.raw(), g.positional.raw());
  push(m.output_proj.raw(), g.output_proj.raw());
  params.push_back(m.norm_final.data());
  grads.push_back(g.norm_final.data());
  sizes.push_back(m.norm_final.size());
  for (std::size_t l = 0; l < m.cfg.n_layers; ++l) {
    push(m.layers[l].q.raw(), g.layers[l].q.raw());
    push(m.layers[l].k.raw(), g.layers[l].k.raw());
    push(m.layers[l].v.raw(), g.layers[l].v.raw());
    push(m.layers[l].u_attn.raw(), g.layers[l].u_attn.raw());
    push(m.layers[l].w_mlp.raw(), g.layers[l].w_mlp.raw());
    push(m.layers[l].u_mlp.raw(), g.layers[l].u_mlp.raw());
    params.push_back(m.layers[l].norm_attn.data());
    grads.push_back(g.layers[l].norm_attn.data());
    sizes.push_back(m.layers[l].norm_attn.size());
    params.push_back(m.layers[l].norm_mlp.data());
    grads.push_back(g.layers[l].norm_mlp.data());
    sizes.push_back(m.layers[l].norm_mlp.size());
  }
}

}  // namespace detail

struct TrainOpts {
  std::size_t steps = 300;
  std::size_t batch = 8;
  std::size_t seq_len = 64;
  double lr = 3e-3;
};

struct TrainResult {
  ToyModel model;
  CharVocab vocab;
  double first_loss = 0.0;
  double final_loss = 0.0;
};

// Character-level next-token training with Adam. Fully deterministic for
// a given (config seed, text, options).
inline TrainResult train_char_model(ToyModelConfig cfg, std::string_view text,
                                    const TrainOpts& opts = {}) {
  const CharVocab vocab = CharVocab::build(text, cfg.vocab_size);
  cfg.vocab_size = vocab.size();
  if (cfg.max_seq < opts.seq_len) cfg.max_seq = opts.seq_len;
  const std::vector<std::size_t> ids = vocab.encode(text);
  if (ids.size() < opts.seq_len + 2)
    throw DomainError("train_char_model: corpus shorter than one training window");

  TrainResult out;
  out.model = ToyModel::init(cfg);
  out.vocab = vocab;
  detail::ModelGrads grads = detail::ModelGrads::zeros_like(out.model);

  std::vector<double*> params, gptrs;
  std::vector<std::size_t> sizes;
  detail::collect_params(out.model, grads, params, gptrs, sizes);
  std::size_t total = 0;
  for (std::size_t s : sizes) total += s;
  std::vector<double> adam_m(total, 0.0), adam_v(total, 0.0);

  const std::size_t n_starts = ids.size() - opts.seq_len - 1;
  for (std::size_t step = 0; step < opts.steps; ++step) {
    for (std::size_t k = 0; k < sizes.size(); ++k)
      std::fill(gptrs[k], gptrs[k] + sizes[k], 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < opts.batch; ++b) {
      const std::size_t start = ((step * opts.batch + b) * 97) % n_starts;
      std::vector<std::size_t> window(ids.begin() + start,
                                      ids.begin() + start + opts.seq_len + 1);
      const detail::ForwardCache fc = detail::toy_forward_cached(out.model, window);
      loss += detail::toy_backward(out.model, window, fc, grads) /
              static_cast<double>(opts.batch);
    }
    if (step == 0) out.first_loss = loss;
    out.final_loss = loss;

    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step + 1));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step + 1));
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      for (std::size_t i = 0; i < sizes[k]; ++i) {
        const double g = gptrs[k][i] / static_cast<double>(opts.batch);
        adam_m[off + i] = b1 * adam_m[off + i] + (1.0 - b1) * g;
        adam_v[off + i] = b2 * adam_v[off + i] + (1.0 - b2) * g * g;
        params[k][i] -=
            opts.lr * (adam_m[off + i] / bc1) / (std::sqrt(adam_v[off + i] / bc2) + eps);
      }
      off += sizes[k];
    }
  }
  return out;
}

}  // namespace airtp
