#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "airtp/error.hpp"

namespace airtp {

struct ResultRecord {
  std::string experiment;
  std::string param_json;  // compact JSON echo of the parameter point
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string timestamp;  // filled at write time
};

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
  bool needs = false;
  for (char c : s)
    if (c == ',' || c == '"' || c == '\n') needs = true;
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace detail

// CSV with the fixed header row; the timestamp column is the only
// nondeterministic output.
inline void write_results(const std::vector<ResultRecord>& records, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("write_results: cannot open " + path);
  os << "experiment,param_json,metric,value,seed,timestamp\n";
  const std::string stamp = detail::now_iso8601();
  for (const ResultRecord& r : records) {
    os << detail::csv_quote(r.experiment) << ',' << detail::csv_quote(r.param_json) << ','
       << detail::csv_quote(r.metric) << ',' << format_value(r.value) << ',' << r.seed << ','
       << (r.timestamp.empty() ? stamp : r.timestamp) << '\n';
  }
  if (!os) throw Error("write_results: write failure on " + path);
}

// Per-metric mean and standard deviation across seeds.
inline void write_summary(const std::vector<ResultRecord>& records, const std::string& path) {
  struct Acc {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> by_metric;
  for (const ResultRecord& r : records) {
    Acc& a = by_metric[r.metric];
    a.sum += r.value;
    a.sumsq += r.value * r.value;
    a.n += 1;
  }
  nlohmann::json summary;
  for (const auto& [metric, acc] : by_metric) {
    const double mean = acc.sum / static_cast<double>(acc.n);
    const double var = std::max(0.0, acc.sumsq / static_cast<double>(acc.n) - mean * mean);
    summary[metric] = {{"mean", mean}, {"std", std::sqrt(var)}, {"count", acc.n}};
  }
  std::ofstream os(path);
  if (!os) throw Error("write_summary: cannot open " + path);
  os << summary.dump(2) << '\n';
}

}  // namespace airtp
