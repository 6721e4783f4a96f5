#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "airtp/error.hpp"
#include "airtp/toy_model.hpp"
#include "airtp/toy_train.hpp"

namespace airtp {

// Flat binary weight container: a fixed header (magic, version, dtype
// tag, dimensions, seed), the vocabulary byte table, then every weight
// tensor as little-endian IEEE-754 doubles in a fixed order.
namespace detail {

constexpr std::uint32_t kModelMagic = 0x4154504d;  // "MPTA" little-endian on disk
constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kDtypeF64LE = 0;

inline void write_u32(std::ostream& os, std::uint32_t v) {
  std::array<unsigned char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  std::array<unsigned char, 4> b;
  is.read(reinterpret_cast<char*>(b.data()), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v & 0xffffffffULL));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t read_u64(std::istream& is) {
  const std::uint64_t lo = read_u32(is);
  const std::uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

inline void write_f64_block(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    write_u64(os, bits);
  }
}

inline void read_f64_block(std::istream& is, std::vector<double>& v) {
  for (double& x : v) {
    const std::uint64_t bits = read_u64(is);
    std::memcpy(&x, &bits, 8);
  }
}

}  // namespace detail

inline void save_model(const ToyModel& model, const CharVocab& vocab, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("save_model: cannot open " + path);
  detail::write_u32(os, detail::kModelMagic);
  detail::write_u32(os, detail::kModelVersion);
  detail::write_u32(os, detail::kDtypeF64LE);
  detail::write_u32(os, static_cast<std::uint32_t>(model.cfg.activation));
  detail::write_u64(os, model.cfg.seed);
  for (std::size_t dim : {model.cfg.d_model, model.cfg.d_hidden, model.cfg.n_heads,
                          model.cfg.n_layers, model.cfg.vocab_size, model.cfg.max_seq})
    detail::write_u64(os, dim);
  detail::write_u64(os, vocab.id_to_byte.size());
  os.write(reinterpret_cast<const char*>(vocab.id_to_byte.data()),
           static_cast<std::streamsize>(vocab.id_to_byte.size()));
  detail::write_f64_block(os, model.embedding.raw());
  detail::write_f64_block(os, model.positional.raw());
  for (const LayerWeights& lw : model.layers) {
    detail::write_f64_block(os, lw.q.raw());
    detail::write_f64_block(os, lw.k.raw());
    detail::write_f64_block(os, lw.v.raw());
    detail::write_f64_block(os, lw.u_attn.raw());
    detail::write_f64_block(os, lw.w_mlp.raw());
    detail::write_f64_block(os, lw.u_mlp.raw());
    detail::write_f64_block(os, lw.norm_attn);
    detail::write_f64_block(os, lw.norm_mlp);
  }
  detail::write_f64_block(os, model.norm_final);
  detail::write_f64_block(os, model.output_proj.raw());
  if (!os) throw Error("save_model: write failure on " + path);
}

inline std::pair<ToyModel, CharVocab> load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_model: cannot open " + path);
  if (detail::read_u32(is) != detail::kModelMagic)
    throw Error("load_model: bad magic in " + path);
  if (detail::read_u32(is) != detail::kModelVersion)
    throw Error("load_model: unsupported version in " + path);
  if (detail::read_u32(is) != detail::kDtypeF64LE)
    throw Error("load_model: unsupported dtype in " + path);
  ToyModelConfig cfg;
  cfg.activation = static_cast<Activation>(detail::read_u32(is));
  cfg.seed = detail::read_u64(is);
  cfg.d_model = detail::read_u64(is);
  cfg.d_hidden = detail::read_u64(is);
  cfg.n_heads = detail::read_u64(is);
  cfg.n_layers = detail::read_u64(is);
  cfg.vocab_size = detail::read_u64(is);
  cfg.max_seq = detail::read_u64(is);
  cfg.validate();

  CharVocab vocab;
  const std::uint64_t vb = detail::read_u64(is);
  vocab.id_to_byte.resize(vb);
  is.read(reinterpret_cast<char*>(vocab.id_to_byte.data()), static_cast<std::streamsize>(vb));
  for (std::size_t i = 0; i < vocab.id_to_byte.size(); ++i)
    vocab.byte_to_id[vocab.id_to_byte[i]] = i;

  ToyModel m = ToyModel::init(cfg);  // allocates the right shapes
  detail::read_f64_block(is, m.embedding.raw());
  detail::read_f64_block(is, m.positional.raw());
  for (LayerWeights& lw : m.layers) {
    detail::read_f64_block(is, lw.q.raw());
    detail::read_f64_block(is, lw.k.raw());
    detail::read_f64_block(is, lw.v.raw());
    detail::read_f64_block(is, lw.u_attn.raw());
    detail::read_f64_block(is, lw.w_mlp.raw());
    detail::read_f64_block(is, lw.u_mlp.raw());
    detail::read_f64_block(is, lw.norm_attn);
    detail::read_f64_block(is, lw.norm_mlp);
  }
  detail::read_f64_block(is, m.norm_final);
  detail::read_f64_block(is, m.output_proj.raw());
  if (!is) throw Error("load_model: truncated file " + path);
  return {std::move(m), std::move(vocab)};
}

}  // namespace airtp
