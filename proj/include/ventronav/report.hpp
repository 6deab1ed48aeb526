#pragma once

// Per-trial CSV records and the JSON summary derived from them. The summary is
// a pure function of the CSV rows, so it can be recomputed from the file alone.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ventronav/landmarks.hpp"
#include "ventronav/mesh_io.hpp"
#include "ventronav/serialization.hpp"

namespace ventronav {

/// Clinical acceptability threshold for target registration error, mm.
inline constexpr double kTreThresholdMm = 5.0;
/// Reference accuracy reported for the expert phantom study: mean ± SD RMSE, mm.
inline constexpr double kReferenceRmseMean = 2.54;
inline constexpr double kReferenceRmseSd = 0.46;

struct TrialRecord {
  std::int64_t trial = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  ///< "ok" or "rejected:<ErrorCode>"
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double tre_entry = std::numeric_limits<double>::quiet_NaN();
  double tre_target = std::numeric_limits<double>::quiet_NaN();
  double scale = std::numeric_limits<double>::quiet_NaN();
  std::array<double, kLandmarkCount> residuals{};

  bool ok() const { return status == "ok"; }
};

namespace detail {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  return format_double(v);
}

inline double parse_csv_double(std::string_view field, std::size_t offset) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ParseError(offset, "bad number '" + std::string(field) + "'");
  }
  return v;
}

template <typename Int>
Int parse_csv_int(std::string_view field, std::size_t offset) {
  Int v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ParseError(offset, "bad integer '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace detail

inline std::string csv_header() {
  std::string h = "trial,seed,status,rmse_mm,tre_entry_mm,tre_target_mm,scale";
  for (auto id : kLandmarkOrder) h += ",residual_" + std::string(to_string(id)) + "_mm";
  return h + "\n";
}

inline std::string to_csv(const std::vector<TrialRecord>& records) {
  std::string out = csv_header();
  for (const auto& r : records) {
    out += std::to_string(r.trial) + ',' + std::to_string(r.seed) + ',' + r.status + ',' + detail::csv_number(r.rmse) +
           ',' + detail::csv_number(r.tre_entry) + ',' + detail::csv_number(r.tre_target) + ',' +
           detail::csv_number(r.scale);
    for (double v : r.residuals) out += ',' + detail::csv_number(v);
    out += '\n';
  }
  return out;
}

inline std::vector<TrialRecord> parse_csv(std::string_view text) {
  const std::string header = csv_header();
  if (text.substr(0, header.size()) != header) throw ParseError(0, "unexpected CSV header");
  std::vector<TrialRecord> out;
  std::size_t pos = header.size();
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty()) {
      std::vector<std::pair<std::string_view, std::size_t>> fields;
      std::size_t start = 0;
      while (true) {
        const std::size_t comma = line.find(',', start);
        fields.emplace_back(line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start),
                            pos + start);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      if (fields.size() != 7 + kLandmarkCount) throw ParseError(pos, "wrong number of CSV fields");
      TrialRecord r;
      r.trial = detail::parse_csv_int<std::int64_t>(fields[0].first, fields[0].second);
      r.seed = detail::parse_csv_int<std::uint64_t>(fields[1].first, fields[1].second);
      r.status = std::string(fields[2].first);
      r.rmse = detail::parse_csv_double(fields[3].first, fields[3].second);
      r.tre_entry = detail::parse_csv_double(fields[4].first, fields[4].second);
      r.tre_target = detail::parse_csv_double(fields[5].first, fields[5].second);
      r.scale = detail::parse_csv_double(fields[6].first, fields[6].second);
      for (std::size_t k = 0; k < kLandmarkCount; ++k) {
        r.residuals[k] = detail::parse_csv_double(fields[7 + k].first, fields[7 + k].second);
      }
      out.push_back(std::move(r));
    }
    pos = eol + 1;
  }
  return out;
}

struct Stats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  ///< sample standard deviation (n - 1)
  double min = 0.0;
  double max = 0.0;
  double p05 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

/// Linear-interpolation percentile of sorted data, q in [0, 1].
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline Stats describe(std::vector<double> values) {
  Stats s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.p05 = percentile_sorted(values, 0.05);
  s.p50 = percentile_sorted(values, 0.50);
  s.p95 = percentile_sorted(values, 0.95);
  return s;
}

inline Json stats_to_json(const Stats& s) {
  return Json{{"n", s.n},     {"mean", s.mean}, {"sd", s.sd},   {"min", s.min},
              {"max", s.max}, {"p05", s.p05},   {"p50", s.p50}, {"p95", s.p95}};
}

/// Summary of a set of trials. Statistics cover registered trials; the
/// threshold fraction counts rejected trials as failures.
inline Json summarize(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "no trials to summarize");
  std::vector<double> rmse, tre_entry, tre_target, scale;
  std::array<std::vector<double>, kLandmarkCount> residuals;
  std::size_t under = 0;
  for (const auto& r : records) {
    if (!r.ok()) continue;
    rmse.push_back(r.rmse);
    tre_entry.push_back(r.tre_entry);
    tre_target.push_back(r.tre_target);
    scale.push_back(r.scale);
    for (std::size_t k = 0; k < kLandmarkCount; ++k) residuals[k].push_back(r.residuals[k]);
    if (r.tre_entry < kTreThresholdMm) ++under;
  }
  Json per_landmark = Json::object();
  for (auto id : kLandmarkOrder) {
    per_landmark[std::string(to_string(id))] = stats_to_json(describe(residuals[index_of(id)]));
  }
  const auto rmse_stats = describe(rmse);
  return Json{{"schema_version", kSchemaVersion},
              {"trials", records.size()},
              {"registered", rmse.size()},
              {"rejected", records.size() - rmse.size()},
              {"rmse_mm", stats_to_json(rmse_stats)},
              {"tre_entry_mm", stats_to_json(describe(tre_entry))},
              {"tre_target_mm", stats_to_json(describe(tre_target))},
              {"scale", stats_to_json(describe(scale))},
              {"residual_mm", per_landmark},
              {"tre_threshold_mm", kTreThresholdMm},
              {"fraction_tre_under_threshold",
               static_cast<double>(under) / static_cast<double>(records.size())},
              {"reference", Json{{"rmse_mean_mm", kReferenceRmseMean},
                                 {"rmse_sd_mm", kReferenceRmseSd},
                                 {"rmse_mean_within_5_percent",
                                  std::abs(rmse_stats.mean - kReferenceRmseMean) <= 0.05 * kReferenceRmseMean}}}};
}

struct ReportPaths {
  std::filesystem::path csv;
  std::filesystem::path summary;
};

/// Writes trials.csv and summary.json into `dir`.
inline ReportPaths write_report(const std::vector<TrialRecord>& records, const std::filesystem::path& dir) {
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "no trials to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  ReportPaths paths{dir / "trials.csv", dir / "summary.json"};
  detail::write_file(paths.csv, to_csv(records));
  detail::write_file(paths.summary, summarize(records).dump(2) + "\n");
  return paths;
}

}  // namespace ventronav
