#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recsim/dataset.hpp"
#include "recsim/sim_engine.hpp"

namespace recsim {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of `ys` against x = 1..n. Needs n >= 2.
std::optional<LinearFit> fit_trend(std::span<const double> ys);

/// Popularity statistics of one trajectory, in attribute units.
struct TrajectoryReport {
  std::size_t id = 0;
  std::vector<double> series;  // rho(c_t), t = 1..T
  double seed_popularity = 0.0;  // mean rho over seed choices
  double first_step_popularity = 0.0;
  double mean_popularity = 0.0;
  double last_step_popularity = 0.0;
  double first_step_increase = 0.0;  // first step minus seed mean
  std::optional<double> slope;       // absent when T < 2
  std::optional<double> intercept;

  friend bool operator==(const TrajectoryReport&, const TrajectoryReport&) = default;
};

TrajectoryReport trajectory_report(const Trajectory& trajectory, const PopularityAttribute& attribute);

struct Quantiles {
  double mean = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;

  friend bool operator==(const Quantiles&, const Quantiles&) = default;
};

/// Linear interpolation between order statistics at position q * (n - 1).
double percentile(std::vector<double> values, double q);

enum class CohortSplit { none, seed_quartile };

CohortSplit parse_cohort_split(std::string_view name);
std::string_view to_string(CohortSplit split);

struct CohortSummary {
  std::string label = "all";
  std::size_t count = 0;
  std::string attribute_mode = "raw_count";
  std::string first_step_baseline = "seed_mean";
  Quantiles seed_popularity;
  Quantiles first_step_popularity;
  Quantiles mean_popularity;
  Quantiles last_step_popularity;
  Quantiles first_step_increase;
  Quantiles slope;  // over trajectories with a defined slope
  std::size_t slope_count = 0;
  double percent_positive_slope = 0.0;
  double percent_nonpositive_slope = 0.0;
  std::vector<double> step_mean;
  std::vector<double> step_std;  // population standard deviation
  std::vector<double> split_bounds;  // quartile boundaries when split
  std::vector<CohortSummary> groups;

  friend bool operator==(const CohortSummary&, const CohortSummary&) = default;
};

/// Throws Error on an empty cohort. With a seed-quartile split, groups are
/// (-inf, q25], (q25, q50], (q50, q75], (q75, inf) over seed popularity.
CohortSummary summarize_cohort(std::span<const TrajectoryReport> reports,
                               CohortSplit split = CohortSplit::none,
                               PopularityMode mode = PopularityMode::raw_count);

enum class ReportFormat { trajectories_csv, series_csv, summary_json };

ReportFormat parse_report_format(std::string_view name);

inline constexpr std::string_view kTrajectoryCsvHeader =
    "traj_id,seed_pop,first_step_pop,mean_pop,last_step_pop,first_step_increase,slope";
inline constexpr std::string_view kSeriesCsvHeader = "step,mean_popularity,std_popularity";

std::string emit_report(const CohortSummary& summary, std::span<const TrajectoryReport> reports,
                        ReportFormat format);

/// Inverse of the summary_json format.
CohortSummary parse_summary_json(std::string_view text);

}  // namespace recsim
