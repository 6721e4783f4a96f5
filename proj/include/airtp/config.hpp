#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "airtp/assignment.hpp"
#include "airtp/channel.hpp"
#include "airtp/error.hpp"
#include "airtp/perfmodel.hpp"
#include "airtp/toy_model.hpp"

namespace airtp {

enum class ExperimentId {
  convergence,
  mse_vs_n,
  accuracy_vs_n,
  latency_vs_n,
  compare_schemes,
  oracle_check,
};

inline std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::convergence: return "convergence";
    case ExperimentId::mse_vs_n: return "mse_vs_n";
    case ExperimentId::accuracy_vs_n: return "accuracy_vs_n";
    case ExperimentId::latency_vs_n: return "latency_vs_n";
    case ExperimentId::compare_schemes: return "compare_schemes";
    case ExperimentId::oracle_check: return "oracle_check";
  }
  return "?";
}

struct ExperimentConfig {
  ExperimentId id = ExperimentId::convergence;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> device_counts{2, 4, 8};
  std::size_t mc_samples = 200;
  std::size_t train_steps = 300;
  std::string text_path;  // training/evaluation text; empty uses the bundled snippet

  ChannelConfig channel;
  DeviceProfile profile;
  ScaConfig sca;
  LatencyConfig latency;
  ToyModelConfig model;

  void validate() const {
    if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
    channel.validate();
    profile.validate();
    sca.validate();
    latency.validate();
    model.validate();
    if (profile.n_devices() != channel.n_devices)
      throw ConfigError("profile arrays must match channel.n_devices");
  }
};

// Mirrors the §V-A2 operating point: 16 server antennas, bandwidth
// 10 MHz, unit-mean unit-variance Rician fading, P_max = 10, unit noise
// power, Q = 8.
inline ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.channel.n_devices = 4;
  cfg.channel.server_antennas = 16;
  cfg.channel.device_antennas = 1;
  cfg.channel.rician_mean = {1.0, 0.0};
  cfg.channel.rician_variance = 1.0;
  cfg.channel.noise_power = 1.0;

  cfg.profile.energy_coeff.assign(4, 0.008);
  cfg.profile.power_budget.assign(4, 10.0);
  cfg.profile.params_per_layer = 1000.0;
  cfg.profile.payload_symbols = 10.0;
  cfg.profile.symbols_per_round = 1;

  cfg.latency.bandwidth_hz = 1e7;
  cfg.latency.quant_bits = 8;
  cfg.latency.snr_rx = 10.0;
  cfg.latency.payload_symbols = 4096.0;
  cfg.latency.allreduces_per_layer = 2;
  cfg.latency.n_layers = 32;
  cfg.latency.compute_rate.assign(4, 1e6);

  cfg.model.d_model = 64;
  cfg.model.d_hidden = 128;
  cfg.model.n_heads = 8;
  cfg.model.n_layers = 2;
  cfg.model.vocab_size = 128;
  cfg.model.max_seq = 128;
  cfg.model.activation = Activation::relu;
  cfg.model.seed = 1;
  return cfg;
}

// --- minimal TOML-compatible parser ------------------------------------------
//
// Supports the subset the configs use: [section] headers, key = value
// with integers, floats, booleans, quoted strings and flat arrays, plus
// '#' comments. Unknown keys are hard errors.

namespace cfgdetail {

struct Value {
  enum class Kind { number, boolean, string, number_array, string_array } kind;
  double num = 0.0;
  bool boolean = false;
  std::string str;
  std::vector<double> nums;
  std::vector<std::string> strs;
  int line = 0;
};

using Table = std::map<std::string, Value>;  // key "section.key"

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline ConfigError parse_error(int line, const std::string& msg) {
  return ConfigError("config line " + std::to_string(line) + ": " + msg);
}

inline Value parse_scalar(const std::string& tok, int line) {
  Value v;
  v.line = line;
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
    v.kind = Value::Kind::string;
    v.str = tok.substr(1, tok.size() - 2);
    return v;
  }
  if (tok == "true" || tok == "false") {
    v.kind = Value::Kind::boolean;
    v.boolean = tok == "true";
    return v;
  }
  try {
    std::size_t used = 0;
    v.num = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
  } catch (const std::exception&) {
    throw parse_error(line, "cannot parse value '" + tok + "'");
  }
  v.kind = Value::Kind::number;
  return v;
}

inline std::vector<std::string> split_array_items(const std::string& body, int line) {
  std::vector<std::string> items;
  std::string cur;
  bool in_str = false;
  for (char c : body) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string last = trim(cur);
  if (!last.empty()) items.push_back(last);
  if (in_str) throw parse_error(line, "unterminated string in array");
  return items;
}

inline Value parse_value(const std::string& tok, int line) {
  if (!tok.empty() && tok.front() == '[') {
    if (tok.back() != ']') throw parse_error(line, "unterminated array");
    Value v;
    v.line = line;
    const std::vector<std::string> items = split_array_items(tok.substr(1, tok.size() - 2), line);
    bool strings = false, numbers = false;
    for (const std::string& it : items) {
      const Value sv = parse_scalar(it, line);
      if (sv.kind == Value::Kind::string) {
        strings = true;
        v.strs.push_back(sv.str);
      } else if (sv.kind == Value::Kind::number) {
        numbers = true;
        v.nums.push_back(sv.num);
      } else {
        throw parse_error(line, "array elements must be numbers or strings");
      }
    }
    if (strings && numbers) throw parse_error(line, "mixed array element types");
    v.kind = strings ? Value::Kind::string_array : Value::Kind::number_array;
    return v;
  }
  return parse_scalar(tok, line);
}

inline Table parse_toml(std::istream& is) {
  Table table;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // strip comments outside strings
    std::string stripped;
    bool in_str = false;
    for (char c : line) {
      if (c == '"') in_str = !in_str;
      if (c == '#' && !in_str) break;
      stripped += c;
    }
    stripped = trim(stripped);
    if (stripped.empty()) continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']') throw parse_error(lineno, "malformed section header");
      section = trim(stripped.substr(1, stripped.size() - 2));
      if (section.empty()) throw parse_error(lineno, "empty section name");
      continue;
    }
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) throw parse_error(lineno, "expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string val = trim(stripped.substr(eq + 1));
    if (key.empty()) throw parse_error(lineno, "empty key");
    if (section.empty()) throw parse_error(lineno, "key outside any [section]");
    const std::string full = section + "." + key;
    if (table.count(full)) throw parse_error(lineno, "duplicate key '" + full + "'");
    table[full] = parse_value(val, lineno);
  }
  return table;
}

// Typed accessors; every consumed key is checked off so unknown keys can
// be rejected afterwards.
struct Reader {
  Table table;
  std::map<std::string, bool> consumed;

  bool has(const std::string& key) {
    return table.count(key) > 0;
  }

  const Value* get(const std::string& key) {
    auto it = table.find(key);
    if (it == table.end()) return nullptr;
    consumed[key] = true;
    return &it->second;
  }

  double number(const std::string& key, double fallback) {
    const Value* v = get(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::number) throw parse_error(v->line, key + " must be a number");
    return v->num;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const double d = number(key, static_cast<double>(fallback));
    if (d < 0 || d != std::floor(d)) throw ConfigError(key + " must be a nonnegative integer");
    return static_cast<std::size_t>(d);
  }

  std::string str(const std::string& key, const std::string& fallback) {
    const Value* v = get(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::string) throw parse_error(v->line, key + " must be a string");
    return v->str;
  }

  // number or array; scalars broadcast to n entries
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback,
                              std::size_t n) {
    const Value* v = get(key);
    if (!v) {
      if (fallback.size() == 1 && n > 1) fallback.assign(n, fallback[0]);
      return fallback;
    }
    if (v->kind == Value::Kind::number) return std::vector<double>(n, v->num);
    if (v->kind != Value::Kind::number_array)
      throw parse_error(v->line, key + " must be a number or array of numbers");
    if (v->nums.size() != n)
      throw parse_error(v->line, key + " must have " + std::to_string(n) + " entries");
    return v->nums;
  }

  void fail_unknown() const {
    for (const auto& [key, value] : table)
      if (!consumed.count(key))
        throw parse_error(value.line, "unknown key '" + key + "'");
  }

  void require_section(const std::string& name) const {
    const std::string prefix = name + ".";
    for (const auto& [key, value] : table)
      if (key.rfind(prefix, 0) == 0) return;
    throw ConfigError("missing required section [" + name + "]");
  }
};

}  // namespace cfgdetail

inline ExperimentConfig config_from_table(cfgdetail::Table table) {
  cfgdetail::Reader r{std::move(table), {}};
  r.require_section("experiment");
  ExperimentConfig cfg = default_config();

  const std::string id = r.str("experiment.id", "convergence");
  if (id == "convergence") cfg.id = ExperimentId::convergence;
  else if (id == "mse_vs_n") cfg.id = ExperimentId::mse_vs_n;
  else if (id == "accuracy_vs_n") cfg.id = ExperimentId::accuracy_vs_n;
  else if (id == "latency_vs_n") cfg.id = ExperimentId::latency_vs_n;
  else if (id == "compare_schemes") cfg.id = ExperimentId::compare_schemes;
  else if (id == "oracle_check") cfg.id = ExperimentId::oracle_check;
  else throw ConfigError("unknown experiment id '" + id + "'");

  if (const auto* v = r.get("experiment.seeds")) {
    if (v->kind != cfgdetail::Value::Kind::number_array)
      throw ConfigError("experiment.seeds must be an array of integers");
    cfg.seeds.clear();
    for (double d : v->nums) cfg.seeds.push_back(static_cast<std::uint64_t>(d));
  }
  if (const auto* v = r.get("experiment.device_counts")) {
    if (v->kind != cfgdetail::Value::Kind::number_array)
      throw ConfigError("experiment.device_counts must be an array of integers");
    cfg.device_counts.clear();
    for (double d : v->nums) cfg.device_counts.push_back(static_cast<std::size_t>(d));
  }
  cfg.mc_samples = r.count("experiment.mc_samples", cfg.mc_samples);
  cfg.train_steps = r.count("experiment.train_steps", cfg.train_steps);
  cfg.text_path = r.str("experiment.text_path", cfg.text_path);

  cfg.channel.n_devices = r.count("channel.n_devices", cfg.channel.n_devices);
  cfg.channel.server_antennas = r.count("channel.server_antennas", cfg.channel.server_antennas);
  cfg.channel.device_antennas = r.count("channel.device_antennas", cfg.channel.device_antennas);
  cfg.channel.rician_mean = {r.number("channel.rician_mean", cfg.channel.rician_mean.real()),
                             r.number("channel.rician_mean_imag", cfg.channel.rician_mean.imag())};
  cfg.channel.rician_variance = r.number("channel.rician_variance", cfg.channel.rician_variance);
  cfg.channel.noise_power = r.number("channel.noise_power", cfg.channel.noise_power);

  const std::size_t n = cfg.channel.n_devices;
  cfg.profile.energy_coeff = r.numbers("profile.energy_coeff", {0.008}, n);
  cfg.profile.power_budget = r.numbers("profile.power_budget", {10.0}, n);
  cfg.profile.params_per_layer = r.number("profile.params_per_layer", cfg.profile.params_per_layer);
  cfg.profile.payload_symbols = r.number("profile.payload_symbols", cfg.profile.payload_symbols);
  cfg.profile.symbols_per_round = r.count("profile.symbols_per_round", cfg.profile.symbols_per_round);

  cfg.sca.eta0 = r.number("sca.eta0", cfg.sca.eta0);
  cfg.sca.eta1 = r.number("sca.eta1", cfg.sca.eta1);
  cfg.sca.rho_exponent = r.number("sca.rho_exponent", cfg.sca.rho_exponent);
  cfg.sca.gamma_c = r.number("sca.gamma_c", cfg.sca.gamma_c);
  cfg.sca.gamma_cprime = r.number("sca.gamma_cprime", cfg.sca.gamma_cprime);
  cfg.sca.tolerance = r.number("sca.tolerance", cfg.sca.tolerance);
  cfg.sca.max_iters = r.count("sca.max_iters", cfg.sca.max_iters);
  cfg.sca.stability_window = r.count("sca.stability_window", cfg.sca.stability_window);
  const std::string gm = r.str("sca.gradient_mode", "dual_weighted");
  if (gm == "dual_weighted") cfg.sca.gradient_mode = GradientMode::dual_weighted;
  else if (gm == "active_subgradient") cfg.sca.gradient_mode = GradientMode::active_subgradient;
  else throw ConfigError("unknown sca.gradient_mode '" + gm + "'");
  cfg.sca.short_term.max_iters =
      static_cast<int>(r.count("sca.short_term_iters", cfg.sca.short_term.max_iters));
  cfg.sca.short_term.randomization_draws = static_cast<int>(
      r.count("sca.randomization_draws", cfg.sca.short_term.randomization_draws));

  cfg.latency.bandwidth_hz = r.number("latency.bandwidth_hz", cfg.latency.bandwidth_hz);
  cfg.latency.quant_bits = static_cast<int>(r.count("latency.quant_bits", cfg.latency.quant_bits));
  cfg.latency.snr_rx = r.number("latency.snr_rx", cfg.latency.snr_rx);
  cfg.latency.payload_symbols = r.number("latency.payload_symbols", cfg.latency.payload_symbols);
  cfg.latency.allreduces_per_layer =
      r.count("latency.allreduces_per_layer", cfg.latency.allreduces_per_layer);
  cfg.latency.n_layers = r.count("latency.n_layers", cfg.latency.n_layers);
  cfg.latency.compute_rate = r.numbers("latency.compute_rate", {1e6}, n);

  cfg.model.d_model = r.count("model.d_model", cfg.model.d_model);
  cfg.model.d_hidden = r.count("model.d_hidden", cfg.model.d_hidden);
  cfg.model.n_heads = r.count("model.n_heads", cfg.model.n_heads);
  cfg.model.n_layers = r.count("model.n_layers", cfg.model.n_layers);
  cfg.model.vocab_size = r.count("model.vocab_size", cfg.model.vocab_size);
  cfg.model.max_seq = r.count("model.max_seq", cfg.model.max_seq);
  const std::string act = r.str("model.activation", "relu");
  if (act == "relu") cfg.model.activation = Activation::relu;
  else if (act == "gelu") cfg.model.activation = Activation::gelu;
  else throw ConfigError("unknown model.activation '" + act + "'");
  cfg.model.seed = r.count("model.seed", cfg.model.seed);

  r.fail_unknown();
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config_text(const std::string& text) {
  std::istringstream is(text);
  return config_from_table(cfgdetail::parse_toml(is));
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  cfgdetail::Table table = cfgdetail::parse_toml(is);
  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must look like section.key=value, got '" + ov + "'");
    const std::string key = cfgdetail::trim(ov.substr(0, eq));
    const std::string val = cfgdetail::trim(ov.substr(eq + 1));
    table[key] = cfgdetail::parse_value(val, 0);
  }
  return config_from_table(std::move(table));
}

// Canonical echo of the effective configuration; load_config_text on the
// output reproduces the config exactly.
inline std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  const auto arr = [&](const std::vector<double>& v) {
    std::ostringstream a;
    a.precision(17);
    a << "[";
    for (std::size_t i = 0; i < v.size(); ++i) a << (i ? ", " : "") << v[i];
    a << "]";
    return a.str();
  };
  os << "[experiment]\n";
  os << "id = \"" << to_string(cfg.id) << "\"\n";
  os << "seeds = [";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? ", " : "") << cfg.seeds[i];
  os << "]\n";
  os << "device_counts = [";
  for (std::size_t i = 0; i < cfg.device_counts.size(); ++i)
    os << (i ? ", " : "") << cfg.device_counts[i];
  os << "]\n";
  os << "mc_samples = " << cfg.mc_samples << "\n";
  os << "train_steps = " << cfg.train_steps << "\n";
  os << "text_path = \"" << cfg.text_path << "\"\n\n";

  os << "[channel]\n";
  os << "n_devices = " << cfg.channel.n_devices << "\n";
  os << "server_antennas = " << cfg.channel.server_antennas << "\n";
  os << "device_antennas = " << cfg.channel.device_antennas << "\n";
  os << "rician_mean = " << cfg.channel.rician_mean.real() << "\n";
  os << "rician_mean_imag = " << cfg.channel.rician_mean.imag() << "\n";
  os << "rician_variance = " << cfg.channel.rician_variance << "\n";
  os << "noise_power = " << cfg.channel.noise_power << "\n\n";

  os << "[profile]\n";
  os << "energy_coeff = " << arr(cfg.profile.energy_coeff) << "\n";
  os << "power_budget = " << arr(cfg.profile.power_budget) << "\n";
  os << "params_per_layer = " << cfg.profile.params_per_layer << "\n";
  os << "payload_symbols = " << cfg.profile.payload_symbols << "\n";
  os << "symbols_per_round = " << cfg.profile.symbols_per_round << "\n\n";

  os << "[sca]\n";
  os << "eta0 = " << cfg.sca.eta0 << "\n";
  os << "eta1 = " << cfg.sca.eta1 << "\n";
  os << "rho_exponent = " << cfg.sca.rho_exponent << "\n";
  os << "gamma_c = " << cfg.sca.gamma_c << "\n";
  os << "gamma_cprime = " << cfg.sca.gamma_cprime << "\n";
  os << "tolerance = " << cfg.sca.tolerance << "\n";
  os << "max_iters = " << cfg.sca.max_iters << "\n";
  os << "stability_window = " << cfg.sca.stability_window << "\n";
  os << "gradient_mode = \""
     << (cfg.sca.gradient_mode == GradientMode::dual_weighted ? "dual_weighted"
                                                              : "active_subgradient")
     << "\"\n";
  os << "short_term_iters = " << cfg.sca.short_term.max_iters << "\n";
  os << "randomization_draws = " << cfg.sca.short_term.randomization_draws << "\n\n";

  os << "[latency]\n";
  os << "bandwidth_hz = " << cfg.latency.bandwidth_hz << "\n";
  os << "quant_bits = " << cfg.latency.quant_bits << "\n";
  os << "snr_rx = " << cfg.latency.snr_rx << "\n";
  os << "payload_symbols = " << cfg.latency.payload_symbols << "\n";
  os << "allreduces_per_layer = " << cfg.latency.allreduces_per_layer << "\n";
  os << "n_layers = " << cfg.latency.n_layers << "\n";
  os << "compute_rate = " << arr(cfg.latency.compute_rate) << "\n\n";

  os << "[model]\n";
  os << "d_model = " << cfg.model.d_model << "\n";
  os << "d_hidden = " << cfg.model.d_hidden << "\n";
  os << "n_heads = " << cfg.model.n_heads << "\n";
  os << "n_layers = " << cfg.model.n_layers << "\n";
  os << "vocab_size = " << cfg.model.vocab_size << "\n";
  os << "max_seq = " << cfg.model.max_seq << "\n";
  os << "activation = \"" << (cfg.model.activation == Activation::relu ? "relu" : "gelu")
     << "\"\n";
  os << "seed = " << cfg.model.seed << "\n";
  return os.str();
}

}  // namespace airtp
