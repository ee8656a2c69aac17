#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cine/survey.hpp"

namespace cine {

struct Sample {
  std::vector<double> values;
  std::string label;
};

struct TestResult {
  double statistic = 0;
  std::optional<double> df;
  double p_two_sided = 1;
  std::string test_name;
  std::pair<std::string, std::string> group_order;
};

// ---- distributions ----

/// I_x(a, b) by Lentz's continued fraction (tolerance 1e-12, at most 300 terms).
double regularized_incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);
/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);
/// Inverse CDF by bisection on student_t_cdf.
double student_t_quantile(double p, double df);
double normal_cdf(double z);

double mean(std::span<const double> v);
/// n - 1 denominator.
double sample_variance(std::span<const double> v);

// ---- tests ----

/// (mean_a - mean_b) / sqrt(s_a^2/n_a + s_b^2/n_b), Welch-Satterthwaite df,
/// two-sided p from the t distribution.
/// Throws Error(DegenerateSample) for n < 2 or non-finite values, and
/// Error(ZeroVariance) when both samples are constant.
TestResult welch_t(const Sample& a, const Sample& b);

/// One-sample t of the differences against zero (df = k - 1).
/// Throws Error(DegenerateSample) for k < 2 and Error(ZeroVariance) for constant differences.
TestResult paired_t(std::span<const double> differences);

/// U for group a from average ranks; p from the normal approximation with a
/// 0.5 continuity correction and tie-corrected variance. A sample where every
/// value is tied gives p = 1.
TestResult mann_whitney_u(const Sample& a, const Sample& b);

// ---- cells ----

enum class Source { Simulated, Real };

std::string_view to_string(Source s);

struct ResponseRow {
  std::string gender;
  std::string decade;
  std::string item_id;
  double response = 0;
};

struct CellStats {
  std::string gender;
  std::string decade;
  std::string item_id;
  int n = 0;
  double mean = 0;
  double sd = 0;  // sample sd; 0 for a single observation
  Source source = Source::Simulated;
};

std::vector<ResponseRow> rows_from_responses(const std::vector<SurveyResponse>& responses);

struct ReferenceData {
  std::vector<ResponseRow> rows;
  std::size_t skipped_out_of_window = 0;
};

/// `year,gender,item_id,response` with gender F/M and responses 1-5 already
/// in this tool's orientation. Rows outside 1990-2019 are counted and dropped.
/// Throws Error(Unparseable) on malformed rows.
ReferenceData parse_reference_csv(std::string_view csv);

/// One cell per observed (gender, decade, item), ordered by item, decade, gender.
std::vector<CellStats> aggregate_cells(std::span<const ResponseRow> rows, Source source);

struct CellGapResult {
  std::string item_id;
  double delta_mean = 0;  // mean over matched cells of sim - real
  std::vector<double> differences;
  std::optional<TestResult> test;  // paired t over the per-cell differences
  std::string diagnostic;          // set when the test is degenerate
  std::vector<std::string> matched;    // "<gender>/<decade>"
  std::vector<std::string> unmatched;  // "<source>:<gender>/<decade>"
};

inline constexpr double kIdenticalDifferenceTolerance = 1e-9;

/// Pairs simulated and real cells by (gender, decade). Differences that are
/// all zero give t = 0, p = 1; differences that are all equal but non-zero
/// leave `test` empty with the diagnostic "all differences identical".
/// Throws Error(InsufficientCells) with fewer than two matched cells.
CellGapResult cell_gap_test(std::span<const CellStats> sim, std::span<const CellStats> real, std::string_view item_id);

/// Welch then Mann-Whitney, both ordered (M, F): positive statistics mean the
/// male mean is higher. Throws Error(DegenerateSample) if either group has < 2 responses.
std::pair<TestResult, TestResult> gender_contrast(std::span<const ResponseRow> rows, std::string_view item_id);

/// Mean over genders of the sample SD of that gender's decade means.
/// Throws Error(InsufficientCells) if a gender has fewer than two decades.
double decade_volatility(std::span<const CellStats> cells, Source source, std::string_view item_id);

inline constexpr std::string_view kCellsHeader = "item_id,source,gender,decade,n,mean,sd";
std::string cells_to_csv(std::span<const CellStats> cells);

}  // namespace cine
