#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "atp/base_distribution.hpp"
#include "atp/model.hpp"
#include "atp/rng.hpp"

namespace atp {

struct PanelRecord {
  std::string series_id;
  long long time = 0;
  double y = 0.0;
  std::vector<double> exog;
};

/// Long-format multi-series panel. Records are grouped by series in
/// first-appearance order and time-ascending within each series.
struct PanelDataset {
  std::vector<PanelRecord> records;
  std::vector<std::string> series_ids;                  // index -> id
  std::unordered_map<std::string, int> series_index;    // id -> index
  std::vector<std::string> exog_names;
  std::vector<std::size_t> series_offsets;  // size n_series+1, record ranges

  int n_series() const { return static_cast<int>(series_ids.size()); }

  std::span<const PanelRecord> series(int idx) const {
    return {records.data() + series_offsets[idx],
            series_offsets[idx + 1] - series_offsets[idx]};
  }

  double y_min() const {
    double m = records.front().y;
    for (const auto& r : records) m = std::min(m, r.y);
    return m;
  }
  double y_max() const {
    double m = records.front().y;
    for (const auto& r : records) m = std::max(m, r.y);
    return m;
  }
};

namespace detail {

inline double parse_double(const std::string& field, std::size_t line,
                           const char* what) {
  double value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw std::runtime_error("line " + std::to_string(line) +
                             ": non-numeric " + what + " '" + field + "'");
  return value;
}

inline long long parse_time(const std::string& field, std::size_t line) {
  long long value{};
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw std::runtime_error("line " + std::to_string(line) +
                             ": non-integer time '" + field + "'");
  return value;
}

/// RFC-4180 record reader; quoted fields may contain commas, doubled
/// quotes, and newlines. Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            std::size_t& line_counter, std::size_t& record_line) {
  fields.clear();
  int c = in.peek();
  if (c == EOF) return false;
  record_line = line_counter;

  std::string field;
  bool quoted = false;
  bool any = false;
  while (true) {
    c = in.get();
    if (quoted) {
      if (c == EOF) throw std::runtime_error("unterminated quoted field");
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line_counter;
        field.push_back(static_cast<char>(c));
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      any = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == EOF) {
      if (c == '\n') ++line_counter;
      if (c == EOF && !any && field.empty() && fields.empty()) return false;
      fields.push_back(std::move(field));
      return true;
    } else if (c == '\r') {
      // tolerate CRLF
      if (in.peek() == '\n') continue;
      field.push_back('\r');
    } else {
      field.push_back(static_cast<char>(c));
      any = true;
    }
  }
}

inline std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

inline void write_csv_field(std::ostream& out, const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

/// Regroup records by series first-appearance order, time ascending, and
/// rebuild offsets. Throws on duplicate (series, time) pairs, naming the
/// source line when available.
inline void finalize_dataset(PanelDataset& data,
                             const std::vector<std::size_t>* lines) {
  std::vector<std::size_t> perm(data.records.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  auto series_of = [&](std::size_t i) {
    return data.series_index.at(data.records[i].series_id);
  };
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    const int sa = series_of(a), sb = series_of(b);
    if (sa != sb) return sa < sb;
    return data.records[a].time < data.records[b].time;
  });

  for (std::size_t i = 1; i < perm.size(); ++i) {
    const auto& prev = data.records[perm[i - 1]];
    const auto& cur = data.records[perm[i]];
    if (prev.series_id == cur.series_id && prev.time == cur.time) {
      std::string where =
          lines ? "line " + std::to_string((*lines)[perm[i]]) : "record";
      throw std::runtime_error(where + ": duplicate (series_id, time) = (" +
                               cur.series_id + ", " +
                               std::to_string(cur.time) + ")");
    }
  }

  std::vector<PanelRecord> sorted;
  sorted.reserve(data.records.size());
  for (std::size_t i : perm) sorted.push_back(std::move(data.records[i]));
  data.records = std::move(sorted);

  data.series_offsets.assign(1, 0);
  for (std::size_t i = 1; i <= data.records.size(); ++i) {
    if (i == data.records.size() ||
        data.records[i].series_id != data.records[i - 1].series_id)
      data.series_offsets.push_back(i);
  }
}

}  // namespace detail

/// Parse a panel CSV with header `series_id,time,y[,x1,...]`. Series are
/// indexed in first-appearance order; records are sorted by time within
/// each series; duplicate timestamps are an error naming the line.
inline PanelDataset load_panel_csv(std::istream& in) {
  std::vector<std::string> fields;
  std::size_t line_counter = 1, record_line = 0;
  if (!detail::read_csv_record(in, fields, line_counter, record_line))
    throw std::runtime_error("empty file: missing header");
  if (fields.size() < 3 || fields[0] != "series_id" || fields[1] != "time" ||
      fields[2] != "y")
    throw std::runtime_error(
        "missing header columns: expected series_id,time,y[,x1,...]");

  PanelDataset data;
  data.exog_names.assign(fields.begin() + 3, fields.end());
  const std::size_t n_cols = fields.size();
  std::vector<std::size_t> lines;

  while (detail::read_csv_record(in, fields, line_counter, record_line)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing newline
    if (fields.size() != n_cols)
      throw std::runtime_error("line " + std::to_string(record_line) + ": has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(n_cols));
    PanelRecord rec;
    rec.series_id = fields[0];
    rec.time = detail::parse_time(fields[1], record_line);
    rec.y = detail::parse_double(fields[2], record_line, "y");
    rec.exog.reserve(n_cols - 3);
    for (std::size_t k = 3; k < n_cols; ++k)
      rec.exog.push_back(detail::parse_double(fields[k], record_line, "exog"));
    if (!data.series_index.count(rec.series_id)) {
      data.series_index.emplace(rec.series_id,
                                static_cast<int>(data.series_ids.size()));
      data.series_ids.push_back(rec.series_id);
    }
    lines.push_back(record_line);
    data.records.push_back(std::move(rec));
  }
  if (data.records.empty()) throw std::runtime_error("no data rows");
  detail::finalize_dataset(data, &lines);
  return data;
}

inline PanelDataset load_panel_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_panel_csv(in);
}

inline void write_panel_csv(std::ostream& out, const PanelDataset& data) {
  out << "series_id,time,y";
  for (const auto& name : data.exog_names) {
    out << ',';
    detail::write_csv_field(out, name);
  }
  out << '\n';
  for (const auto& rec : data.records) {
    detail::write_csv_field(out, rec.series_id);
    out << ',' << rec.time << ',' << detail::format_double(rec.y);
    for (double x : rec.exog) out << ',' << detail::format_double(x);
    out << '\n';
  }
}

inline void write_panel_csv(const std::string& path, const PanelDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_panel_csv(out, data);
}

/// Supervised rows with p lags, never spanning series boundaries. Series
/// shorter than p+1 contribute nothing and produce a warning.
inline std::vector<SupervisedRow> build_rows(
    const PanelDataset& data, int p,
    std::vector<std::string>* warnings = nullptr) {
  if (p < 0) throw std::invalid_argument("lag order must be non-negative");
  std::vector<SupervisedRow> rows;
  for (int s = 0; s < data.n_series(); ++s) {
    auto recs = data.series(s);
    if (recs.size() <= static_cast<std::size_t>(p)) {
      std::string msg = "series '" + data.series_ids[s] + "' has " +
                        std::to_string(recs.size()) +
                        " observations, need more than " + std::to_string(p) +
                        "; skipped";
      if (warnings)
        warnings->push_back(msg);
      else
        std::cerr << "warning: " << msg << '\n';
      continue;
    }
    for (std::size_t t = p; t < recs.size(); ++t) {
      SupervisedRow row;
      row.y = recs[t].y;
      row.lags.resize(p);
      for (int j = 0; j < p; ++j) row.lags[j] = recs[t - 1 - j].y;
      row.exog = recs[t].exog;
      row.series_idx = s;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace detail {

inline PanelDataset dataset_from_values(const std::vector<double>& y) {
  PanelDataset data;
  data.records.reserve(y.size());
  for (std::size_t t = 0; t < y.size(); ++t)
    data.records.push_back({"s0", static_cast<long long>(t + 1), y[t], {}});
  data.series_ids = {"s0"};
  data.series_index = {{"s0", 0}};
  data.series_offsets = {0, y.size()};
  return data;
}

}  // namespace detail

/// Gaussian AR(p) simulator: y_t = sum_j coefs[j] y_{t-j} + sigma * eps_t.
/// A 200-step burn-in is discarded; deterministic per seed.
inline PanelDataset gen_ar(const std::vector<double>& coefs, int T,
                           double sigma, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("T must be positive");
  const int p = static_cast<int>(coefs.size());
  const int burn_in = 200;
  std::mt19937_64 gen(seed);
  std::vector<double> path(burn_in + T + p, 0.0);
  for (std::size_t t = p; t < path.size(); ++t) {
    double mean = 0.0;
    for (int j = 0; j < p; ++j) mean += coefs[j] * path[t - 1 - j];
    path[t] = mean + sigma * detail::normal_quantile(uniform01(gen));
  }
  std::vector<double> y(path.end() - T, path.end());
  return detail::dataset_from_values(y);
}

/// Exponentiated AR data: exp applied element-wise to gen_ar output, so
/// the log of the output reproduces the latent AR series.
inline PanelDataset gen_exp_ar(const std::vector<double>& coefs, int T,
                               double sigma, std::uint64_t seed) {
  PanelDataset data = gen_ar(coefs, T, sigma, seed);
  for (auto& rec : data.records) {
    if (std::abs(rec.y) > 700.0) throw std::runtime_error("generator overflow");
    rec.y = std::exp(rec.y);
  }
  return data;
}

/// Bimodal toy series: y_0 = 0, latent x_t = +-rho equiprobable,
/// y_t ~ N(phi1 * y_{t-1} + x_t, 1). Only y is emitted.
inline PanelDataset gen_bimodal(int T, double rho, double phi1,
                                std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("T must be positive");
  std::mt19937_64 gen(seed);
  std::vector<double> y(T);
  double prev = 0.0;
  for (int t = 0; t < T; ++t) {
    const double x = (uniform01(gen) < 0.5) ? -rho : rho;
    y[t] = phi1 * prev + x + detail::normal_quantile(uniform01(gen));
    prev = y[t];
  }
  return detail::dataset_from_values(y);
}

}  // namespace atp
