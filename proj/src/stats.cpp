#include "cine/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

#include "cine/corpus.hpp"
#include "cine/csv.hpp"
#include "cine/error.hpp"
#include "cine/util.hpp"

namespace cine {

namespace {

constexpr double kBetaTolerance = 1e-12;
constexpr int kBetaMaxIterations = 300;

double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kBetaTolerance) break;
  }
  return h;
}

void require_usable(const Sample& s) {
  if (s.values.size() < 2) {
    throw Error(ErrorCode::DegenerateSample, "sample '" + s.label + "' has fewer than 2 values");
  }
  for (double v : s.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateSample, "sample '" + s.label + "' has a non-finite value");
  }
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The continued fraction converges fastest below the mean of the beta density.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided_p(t, df);
  return t > 0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  double lo = -1.0;
  double hi = 1.0;
  while (student_t_cdf(lo, df) > p) lo *= 2.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, std::fabs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

TestResult welch_t(const Sample& a, const Sample& b) {
  require_usable(a);
  require_usable(b);
  const double na = static_cast<double>(a.values.size());
  const double nb = static_cast<double>(b.values.size());
  const double va = sample_variance(a.values);
  const double vb = sample_variance(b.values);
  if (va == 0.0 && vb == 0.0) {
    throw Error(ErrorCode::ZeroVariance, "samples '" + a.label + "' and '" + b.label + "' are both constant");
  }
  const double ra = va / na;
  const double rb = vb / nb;
  const double t = (mean(a.values) - mean(b.values)) / std::sqrt(ra + rb);
  const double df = (ra + rb) * (ra + rb) / (ra * ra / (na - 1.0) + rb * rb / (nb - 1.0));
  return TestResult{t, df, student_t_two_sided_p(t, df), "welch_t", {a.label, b.label}};
}

TestResult paired_t(std::span<const double> differences) {
  if (differences.size() < 2) throw Error(ErrorCode::DegenerateSample, "paired t needs at least 2 differences");
  const double v = sample_variance(differences);
  if (v == 0.0) throw Error(ErrorCode::ZeroVariance, "all differences identical");
  const double k = static_cast<double>(differences.size());
  const double t = mean(differences) / std::sqrt(v / k);
  return TestResult{t, k - 1.0, student_t_two_sided_p(t, k - 1.0), "paired_t", {"sim", "real"}};
}

TestResult mann_whitney_u(const Sample& a, const Sample& b) {
  require_usable(a);
  require_usable(b);
  const std::size_t na = a.values.size();
  const std::size_t nb = b.values.size();
  const std::size_t n = na + nb;

  std::vector<std::pair<double, bool>> pooled;  // value, belongs to a
  pooled.reserve(n);
  for (double v : a.values) pooled.emplace_back(v, true);
  for (double v : b.values) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(), [](const auto& l, const auto& r) { return l.first < r.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second) rank_sum_a += avg_rank;
    }
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(nb);
  const double dn = static_cast<double>(n);
  const double u = rank_sum_a - dna * (dna + 1.0) / 2.0;
  const double mu = dna * dnb / 2.0;
  const double variance = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  double p = 1.0;
  if (variance > 0.0) {
    const double z = std::max(0.0, std::fabs(u - mu) - 0.5) / std::sqrt(variance);
    p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  }
  return TestResult{u, std::nullopt, p, "mann_whitney_u", {a.label, b.label}};
}

std::string_view to_string(Source s) { return s == Source::Simulated ? "simulated" : "real"; }

std::vector<ResponseRow> rows_from_responses(const std::vector<SurveyResponse>& responses) {
  std::vector<ResponseRow> rows;
  rows.reserve(responses.size());
  for (const auto& r : responses) rows.push_back({r.gender, r.decade, r.item_id, static_cast<double>(r.response)});
  return rows;
}

namespace {

bool parse_int(const std::string& text, int& out) {
  const std::string t = trim(text);
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc{} && end == t.data() + t.size() && !t.empty();
}

}  // namespace

ReferenceData parse_reference_csv(std::string_view csv) {
  const auto table = parse_csv(csv);
  if (table.empty() || table.front() != std::vector<std::string>{"year", "gender", "item_id", "response"}) {
    throw Error(ErrorCode::Unparseable, "reference CSV must start with header year,gender,item_id,response");
  }
  ReferenceData data;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& row = table[i];
    const std::string where = "reference row " + std::to_string(i);
    if (row.size() != 4) throw Error(ErrorCode::Unparseable, where + ": expected 4 fields");
    int year = 0;
    int response = 0;
    if (!parse_int(row[0], year) || !parse_int(row[3], response)) {
      throw Error(ErrorCode::Unparseable, where + ": year and response must be integers");
    }
    const Gender g = gender_from_string(row[1]);
    if (g == Gender::Unknown) throw Error(ErrorCode::Unparseable, where + ": gender must be F or M");
    if (response < 1 || response > 5) throw Error(ErrorCode::Unparseable, where + ": response outside 1-5");
    if (std::none_of(survey_items().begin(), survey_items().end(),
                     [&](const SurveyItem& item) { return item.item_id == row[2]; })) {
      throw Error(ErrorCode::Unparseable, where + ": unknown item_id '" + row[2] + "'");
    }
    if (year < kStudyFirstYear || year > kStudyLastYear) {
      ++data.skipped_out_of_window;
      continue;
    }
    data.rows.push_back({std::string(to_string(g)), decade_of(year), row[2], static_cast<double>(response)});
  }
  return data;
}

std::vector<CellStats> aggregate_cells(std::span<const ResponseRow> rows, Source source) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.item_id, r.decade, r.gender}].push_back(r.response);
  std::vector<CellStats> cells;
  for (auto& [key, values] : groups) {
    // Sorting makes the floating-point sums independent of input order.
    std::sort(values.begin(), values.end());
    const auto& [item, decade, gender] = key;
    cells.push_back(CellStats{gender, decade, item, static_cast<int>(values.size()), mean(values),
                              std::sqrt(sample_variance(values)), source});
  }
  return cells;
}

CellGapResult cell_gap_test(std::span<const CellStats> sim, std::span<const CellStats> real, std::string_view item_id) {
  CellGapResult out;
  out.item_id = std::string(item_id);
  std::map<std::pair<std::string, std::string>, double> real_means;
  for (const auto& c : real) {
    if (c.item_id == item_id) real_means[{c.gender, c.decade}] = c.mean;
  }
  std::map<std::pair<std::string, std::string>, double> sim_means;
  for (const auto& c : sim) {
    if (c.item_id == item_id) sim_means[{c.gender, c.decade}] = c.mean;
  }
  for (const auto& [key, m] : sim_means) {
    const std::string label = key.first + "/" + key.second;
    if (auto it = real_means.find(key); it != real_means.end()) {
      out.differences.push_back(m - it->second);
      out.matched.push_back(label);
    } else {
      out.unmatched.push_back("simulated:" + label);
    }
  }
  for (const auto& [key, m] : real_means) {
    if (!sim_means.contains(key)) out.unmatched.push_back("real:" + key.first + "/" + key.second);
  }
  if (out.differences.size() < 2) {
    throw Error(ErrorCode::InsufficientCells, std::string(item_id) + ": " + std::to_string(out.differences.size()) +
                                                  " matched cells, need at least 2");
  }
  out.delta_mean = mean(out.differences);

  const auto [lo, hi] = std::minmax_element(out.differences.begin(), out.differences.end());
  if (*hi - *lo <= kIdenticalDifferenceTolerance) {
    if (std::fabs(out.delta_mean) <= kIdenticalDifferenceTolerance) {
      const double df = static_cast<double>(out.differences.size()) - 1.0;
      out.test = TestResult{0.0, df, 1.0, "paired_t", {"sim", "real"}};
    } else {
      out.diagnostic = "all differences identical";
    }
    return out;
  }
  out.test = paired_t(out.differences);
  return out;
}

std::pair<TestResult, TestResult> gender_contrast(std::span<const ResponseRow> rows, std::string_view item_id) {
  Sample male{{}, "M"};
  Sample female{{}, "F"};
  for (const auto& r : rows) {
    if (r.item_id != item_id) continue;
    if (r.gender == "M") male.values.push_back(r.response);
    if (r.gender == "F") female.values.push_back(r.response);
  }
  return {welch_t(male, female), mann_whitney_u(male, female)};
}

double decade_volatility(std::span<const CellStats> cells, Source source, std::string_view item_id) {
  std::map<std::string, std::vector<double>> by_gender;
  for (const auto& c : cells) {
    if (c.source == source && c.item_id == item_id) by_gender[c.gender].push_back(c.mean);
  }
  if (by_gender.empty()) throw Error(ErrorCode::InsufficientCells, std::string(item_id) + ": no cells");
  double total = 0.0;
  for (const auto& [gender, means] : by_gender) {
    if (means.size() < 2) {
      throw Error(ErrorCode::InsufficientCells,
                  std::string(item_id) + ": gender " + gender + " has fewer than 2 decades");
    }
    total += std::sqrt(sample_variance(means));
  }
  return total / static_cast<double>(by_gender.size());
}

std::string cells_to_csv(std::span<const CellStats> cells) {
  std::string out = std::string(kCellsHeader) + "\n";
  for (const auto& c : cells) {
    out += csv_row({c.item_id, std::string(to_string(c.source)), c.gender, c.decade, std::to_string(c.n),
                    fmt::format("{:.6f}", c.mean), fmt::format("{:.6f}", c.sd)});
  }
  return out;
}

}  // namespace cine
