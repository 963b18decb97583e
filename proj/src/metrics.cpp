#include "recsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "recsim/errors.hpp"

namespace recsim {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string number(double x) {
  if (!std::isfinite(x)) return "";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

double sorted_mean(const std::vector<double>& sorted) {
  return std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
}

double sorted_percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Quantiles quantiles(std::vector<double> values) {
  if (values.empty()) return {kNaN, kNaN, kNaN};
  // Sorting first makes every statistic independent of report order.
  std::sort(values.begin(), values.end());
  return {sorted_mean(values), sorted_percentile(values, 0.05), sorted_percentile(values, 0.95)};
}

template <typename F>
Quantiles quantiles_of(std::span<const TrajectoryReport> reports, F field) {
  std::vector<double> values;
  values.reserve(reports.size());
  for (const auto& r : reports) values.push_back(field(r));
  return quantiles(std::move(values));
}

CohortSummary summarize_flat(std::span<const TrajectoryReport> reports, PopularityMode mode,
                             std::string label) {
  CohortSummary s;
  s.label = std::move(label);
  s.count = reports.size();
  s.attribute_mode = std::string(to_string(mode));
  if (reports.empty()) {
    s.seed_popularity = s.first_step_popularity = s.mean_popularity = s.last_step_popularity =
        s.first_step_increase = s.slope = {kNaN, kNaN, kNaN};
    return s;
  }
  s.seed_popularity = quantiles_of(reports, [](const auto& r) { return r.seed_popularity; });
  s.first_step_popularity = quantiles_of(reports, [](const auto& r) { return r.first_step_popularity; });
  s.mean_popularity = quantiles_of(reports, [](const auto& r) { return r.mean_popularity; });
  s.last_step_popularity = quantiles_of(reports, [](const auto& r) { return r.last_step_popularity; });
  s.first_step_increase = quantiles_of(reports, [](const auto& r) { return r.first_step_increase; });

  std::vector<double> slopes;
  std::size_t positive = 0;
  for (const auto& r : reports) {
    if (!r.slope) continue;
    slopes.push_back(*r.slope);
    if (*r.slope > 0.0) ++positive;
  }
  s.slope_count = slopes.size();
  s.slope = quantiles(std::move(slopes));
  if (s.slope_count > 0) {
    s.percent_positive_slope = 100.0 * static_cast<double>(positive) / static_cast<double>(s.slope_count);
    s.percent_nonpositive_slope = 100.0 - s.percent_positive_slope;
  }

  std::size_t steps = 0;
  for (const auto& r : reports) steps = std::max(steps, r.series.size());
  std::vector<double> column;
  for (std::size_t t = 0; t < steps; ++t) {
    column.clear();
    for (const auto& r : reports) {
      if (t < r.series.size()) column.push_back(r.series[t]);
    }
    std::sort(column.begin(), column.end());
    const double mean = sorted_mean(column);
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    s.step_mean.push_back(mean);
    s.step_std.push_back(std::sqrt(ss / static_cast<double>(column.size())));
  }
  return s;
}

json quantiles_json(const Quantiles& q) { return {{"mean", q.mean}, {"p5", q.p5}, {"p95", q.p95}}; }

double json_number(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

Quantiles quantiles_from(const json& j) {
  return {json_number(j.at("mean")), json_number(j.at("p5")), json_number(j.at("p95"))};
}

std::vector<double> numbers_from(const json& j) {
  std::vector<double> out;
  for (const auto& v : j) out.push_back(json_number(v));
  return out;
}

json summary_json(const CohortSummary& s) {
  json groups = json::array();
  for (const auto& g : s.groups) groups.push_back(summary_json(g));
  return {
      {"label", s.label},
      {"count", s.count},
      {"attribute_mode", s.attribute_mode},
      {"first_step_baseline", s.first_step_baseline},
      {"metrics",
       {{"seed_pop", quantiles_json(s.seed_popularity)},
        {"first_step_pop", quantiles_json(s.first_step_popularity)},
        {"mean_pop", quantiles_json(s.mean_popularity)},
        {"last_step_pop", quantiles_json(s.last_step_popularity)},
        {"first_step_increase", quantiles_json(s.first_step_increase)},
        {"slope", quantiles_json(s.slope)}}},
      {"slope_count", s.slope_count},
      {"percent_positive_slope", s.percent_positive_slope},
      {"percent_nonpositive_slope", s.percent_nonpositive_slope},
      {"series", {{"mean", s.step_mean}, {"std", s.step_std}}},
      {"split_bounds", s.split_bounds},
      {"groups", groups},
  };
}

CohortSummary summary_from(const json& j) {
  CohortSummary s;
  s.label = j.at("label").get<std::string>();
  s.count = j.at("count").get<std::size_t>();
  s.attribute_mode = j.at("attribute_mode").get<std::string>();
  s.first_step_baseline = j.at("first_step_baseline").get<std::string>();
  const auto& m = j.at("metrics");
  s.seed_popularity = quantiles_from(m.at("seed_pop"));
  s.first_step_popularity = quantiles_from(m.at("first_step_pop"));
  s.mean_popularity = quantiles_from(m.at("mean_pop"));
  s.last_step_popularity = quantiles_from(m.at("last_step_pop"));
  s.first_step_increase = quantiles_from(m.at("first_step_increase"));
  s.slope = quantiles_from(m.at("slope"));
  s.slope_count = j.at("slope_count").get<std::size_t>();
  s.percent_positive_slope = json_number(j.at("percent_positive_slope"));
  s.percent_nonpositive_slope = json_number(j.at("percent_nonpositive_slope"));
  s.step_mean = numbers_from(j.at("series").at("mean"));
  s.step_std = numbers_from(j.at("series").at("std"));
  s.split_bounds = numbers_from(j.at("split_bounds"));
  for (const auto& g : j.at("groups")) s.groups.push_back(summary_from(g));
  return s;
}

}  // namespace

std::optional<LinearFit> fit_trend(std::span<const double> ys) {
  if (ys.size() < 2) return std::nullopt;
  const double n = static_cast<double>(ys.size());
  const double x_mean = (n + 1.0) / 2.0;
  const double y_mean = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double dx = static_cast<double>(i + 1) - x_mean;
    sxx += dx * dx;
    sxy += dx * (ys[i] - y_mean);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  return fit;
}

TrajectoryReport trajectory_report(const Trajectory& trajectory, const PopularityAttribute& attribute) {
  if (trajectory.seed.empty()) throw Error("trajectory report needs at least one seed choice");
  if (trajectory.steps.empty()) throw Error("trajectory report needs at least one simulated step");
  TrajectoryReport r;
  r.id = trajectory.id;
  double seed_sum = 0.0;
  for (const auto& s : trajectory.seed) seed_sum += attribute.value_of(s.choice);
  r.seed_popularity = seed_sum / static_cast<double>(trajectory.seed.size());
  for (const auto& s : trajectory.steps) r.series.push_back(attribute.value_of(s.choice));
  r.first_step_popularity = r.series.front();
  r.last_step_popularity = r.series.back();
  r.mean_popularity =
      std::accumulate(r.series.begin(), r.series.end(), 0.0) / static_cast<double>(r.series.size());
  r.first_step_increase = r.first_step_popularity - r.seed_popularity;
  if (auto fit = fit_trend(r.series)) {
    r.slope = fit->slope;
    r.intercept = fit->intercept;
  }
  return r;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  return sorted_percentile(values, std::clamp(q, 0.0, 1.0));
}

CohortSplit parse_cohort_split(std::string_view name) {
  if (name == "none" || name.empty()) return CohortSplit::none;
  if (name == "seed_quartile" || name == "seed-quartile") return CohortSplit::seed_quartile;
  throw ConfigError("unknown cohort split '" + std::string(name) + "' (expected none or seed_quartile)");
}

std::string_view to_string(CohortSplit split) {
  return split == CohortSplit::seed_quartile ? "seed_quartile" : "none";
}

CohortSummary summarize_cohort(std::span<const TrajectoryReport> reports, CohortSplit split,
                               PopularityMode mode) {
  if (reports.empty()) throw Error("cannot summarize an empty cohort");
  auto summary = summarize_flat(reports, mode, "all");
  if (split == CohortSplit::none) return summary;

  std::vector<double> seeds;
  for (const auto& r : reports) seeds.push_back(r.seed_popularity);
  std::sort(seeds.begin(), seeds.end());
  summary.split_bounds = {sorted_percentile(seeds, 0.25), sorted_percentile(seeds, 0.5),
                          sorted_percentile(seeds, 0.75)};
  std::vector<std::vector<TrajectoryReport>> buckets(4);
  for (const auto& r : reports) {
    const auto& b = summary.split_bounds;
    // Number of bounds strictly below the value; ties go to the lower quartile.
    const auto bucket = static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), r.seed_popularity) - b.begin());
    buckets[bucket].push_back(r);
  }
  for (std::size_t q = 0; q < 4; ++q) {
    summary.groups.push_back(summarize_flat(buckets[q], mode, "q" + std::to_string(q + 1)));
  }
  return summary;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "trajectories_csv" || name == "trajectories-csv") return ReportFormat::trajectories_csv;
  if (name == "series_csv" || name == "series-csv") return ReportFormat::series_csv;
  if (name == "json" || name == "summary_json") return ReportFormat::summary_json;
  throw ConfigError("unknown report format '" + std::string(name) +
                    "' (expected trajectories_csv, series_csv or json)");
}

std::string emit_report(const CohortSummary& summary, std::span<const TrajectoryReport> reports,
                        ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::trajectories_csv:
      out << kTrajectoryCsvHeader << '\n';
      for (const auto& r : reports) {
        out << r.id << ',' << number(r.seed_popularity) << ',' << number(r.first_step_popularity) << ','
            << number(r.mean_popularity) << ',' << number(r.last_step_popularity) << ','
            << number(r.first_step_increase) << ',' << (r.slope ? number(*r.slope) : "") << '\n';
      }
      break;
    case ReportFormat::series_csv:
      out << kSeriesCsvHeader << '\n';
      for (std::size_t t = 0; t < summary.step_mean.size(); ++t) {
        out << t + 1 << ',' << number(summary.step_mean[t]) << ',' << number(summary.step_std[t]) << '\n';
      }
      break;
    case ReportFormat::summary_json:
      out << summary_json(summary).dump(2) << '\n';
      break;
  }
  return out.str();
}

CohortSummary parse_summary_json(std::string_view text) {
  try {
    return summary_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("invalid summary JSON: ") + e.what());
  }
}

}  // namespace recsim
