#pragma once

// Teacher-guided filtering and label replacement of generated samples.
//
// Each fake pair gets an error between its assigned label and the teacher's
// prediction: -log p_t(assigned | x) at temperature 1 for classes, |f_t(x) - y|
// for scalars. Pairs whose error exceeds the rho-th quantile are dropped, per
// class for classification and globally for regression. Regression labels of
// the survivors are then overwritten by the teacher prediction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cgankd/dataset.hpp"
#include "cgankd/nncore.hpp"

namespace cgankd {

inline constexpr double kDefaultRhoClassification = 0.9;
inline constexpr double kDefaultRhoRegression = 0.7;

struct ErrorSummary {
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

struct FilterReport {
  double rho = 1.0;
  std::vector<double> thresholds;     // alpha(rho, c) per class, or the single alpha(rho)
  std::vector<std::size_t> counts_in; // per class, or a single entry
  std::vector<std::size_t> counts_out;
  std::size_t total_in = 0;
  std::size_t total_out = 0;
  std::optional<double> consistency_before;  // classification only
  std::optional<double> consistency_after;   // absent when nothing is kept
  ErrorSummary errors;

  /// Flat `key=value` lines.
  std::string to_kv() const {
    std::ostringstream os;
    os << "rho=" << format_double(rho) << '\n';
    for (std::size_t i = 0; i < thresholds.size(); ++i) os << "threshold." << i << '=' << format_double(thresholds[i]) << '\n';
    for (std::size_t i = 0; i < counts_in.size(); ++i)
      os << "count_in." << i << '=' << counts_in[i] << "\ncount_out." << i << '=' << counts_out[i] << '\n';
    os << "total_in=" << total_in << "\ntotal_out=" << total_out << '\n';
    os << "consistency_before=" << (consistency_before ? format_double(*consistency_before) : "") << '\n';
    os << "consistency_after=" << (consistency_after ? format_double(*consistency_after) : "") << '\n';
    os << "error.min=" << format_double(errors.min) << "\nerror.q25=" << format_double(errors.q25)
       << "\nerror.median=" << format_double(errors.median) << "\nerror.q75=" << format_double(errors.q75)
       << "\nerror.max=" << format_double(errors.max) << '\n';
    return os.str();
  }
};

/// Teacher-vs-assigned error for every sample, in input order.
inline std::vector<double> sample_errors(const nn::NetParams& teacher, const Dataset& samples) {
  nn::check_task(teacher.spec, samples.task());
  std::vector<double> err;
  err.reserve(samples.size());
  nn::Activations a;
  for (const auto& s : samples) {
    const auto& out = nn::forward(teacher, s.features, a);
    if (samples.task().is_classification()) {
      const auto p = nn::softmax(out, 1.0);
      err.push_back(-std::log(std::max(p[static_cast<std::size_t>(class_of(s.label))], nn::kProbFloor)));
    } else {
      err.push_back(std::abs(out[0] - value_of(s.label)));
    }
  }
  return err;
}

/// Number of samples at or below the nearest-rank rho-quantile of n distinct
/// values: ceil(rho * n), with rho * n snapped to an integer when it lies
/// within rounding error of one.
inline std::size_t nearest_rank(double rho, std::size_t n) {
  const double x = rho * static_cast<double>(n);
  const double r = std::round(x);
  const double k = std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? r : std::ceil(x);
  return static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(n)));
}

/// Nearest-rank quantile. rho = 0 returns -infinity (keep nothing); rho = 1
/// returns the maximum (keep everything).
inline double quantile_threshold(std::vector<double> errors, double rho) {
  if (errors.empty()) throw std::invalid_argument("quantile_threshold: empty errors");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("quantile_threshold: rho must be in [0,1]");
  if (rho == 0.0) return -std::numeric_limits<double>::infinity();
  const std::size_t k = nearest_rank(rho, errors.size());
  std::nth_element(errors.begin(), errors.begin() + static_cast<std::ptrdiff_t>(k - 1), errors.end());
  return errors[k - 1];
}

inline ErrorSummary summarize_errors(std::vector<double> e) {
  ErrorSummary s;
  if (e.empty()) return s;
  std::sort(e.begin(), e.end());
  auto q = [&](double p) { return e[nearest_rank(p, e.size()) - 1]; };
  s.min = e.front();
  s.q25 = q(0.25);
  s.median = q(0.5);
  s.q75 = q(0.75);
  s.max = e.back();
  return s;
}

/// Fraction of samples whose teacher argmax equals the assigned class.
inline std::optional<double> label_consistency(const nn::NetParams& teacher, const Dataset& ds) {
  if (ds.empty()) return std::nullopt;
  nn::Activations a;
  std::size_t hit = 0;
  for (const auto& s : ds)
    if (nn::argmax(nn::forward(teacher, s.features, a)) == static_cast<std::size_t>(class_of(s.label))) ++hit;
  return static_cast<double>(hit) / static_cast<double>(ds.size());
}

struct FilterResult {
  Dataset kept;
  FilterReport report;
  std::vector<bool> mask;  // mask[i]: input sample i survived
};

inline Dataset apply_mask(const Dataset& ds, const std::vector<bool>& mask, Provenance p) {
  Dataset out(ds.task(), ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!mask[i]) continue;
    Sample s = ds[i];
    s.provenance = p;
    out.add(std::move(s));
  }
  return out;
}

/// One threshold alpha(rho, c) per class; keeps error <= alpha(rho, c).
inline FilterResult filter_classification(const nn::NetParams& teacher, const Dataset& fakes, double rho) {
  if (!fakes.task().is_classification()) throw std::invalid_argument("filter_classification: not a classification set");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("filter: rho must be in [0,1]");
  const auto C = static_cast<std::size_t>(fakes.task().classes);
  const auto err = sample_errors(teacher, fakes);
  std::vector<std::vector<double>> by_class(C);
  for (std::size_t i = 0; i < fakes.size(); ++i) by_class[static_cast<std::size_t>(class_of(fakes[i].label))].push_back(err[i]);
  FilterResult r{Dataset(fakes.task(), fakes.dim()), {}, std::vector<bool>(fakes.size(), false)};
  r.report.rho = rho;
  for (std::size_t c = 0; c < C; ++c) {
    if (by_class[c].empty()) throw std::invalid_argument("filter_classification: class " + std::to_string(c) + " absent");
    r.report.thresholds.push_back(quantile_threshold(by_class[c], rho));
    r.report.counts_in.push_back(by_class[c].size());
  }
  r.report.counts_out.assign(C, 0);
  for (std::size_t i = 0; i < fakes.size(); ++i) {
    const auto c = static_cast<std::size_t>(class_of(fakes[i].label));
    if (err[i] <= r.report.thresholds[c]) {
      r.mask[i] = true;
      ++r.report.counts_out[c];
    }
  }
  r.kept = apply_mask(fakes, r.mask, Provenance::fake_m2);
  r.report.total_in = fakes.size();
  r.report.total_out = r.kept.size();
  r.report.consistency_before = label_consistency(teacher, fakes);
  r.report.consistency_after = label_consistency(teacher, r.kept);
  r.report.errors = summarize_errors(err);
  return r;
}

/// One global threshold alpha(rho); keeps error <= alpha(rho).
inline FilterResult filter_regression(const nn::NetParams& teacher, const Dataset& fakes, double rho) {
  if (fakes.task().is_classification()) throw std::invalid_argument("filter_regression: not a regression set");
  if (fakes.empty()) throw std::invalid_argument("filter_regression: empty input");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("filter: rho must be in [0,1]");
  const auto err = sample_errors(teacher, fakes);
  FilterResult r{Dataset(fakes.task(), fakes.dim()), {}, std::vector<bool>(fakes.size(), false)};
  r.report.rho = rho;
  const double alpha = quantile_threshold(err, rho);
  r.report.thresholds = {alpha};
  for (std::size_t i = 0; i < fakes.size(); ++i) r.mask[i] = err[i] <= alpha;
  r.kept = apply_mask(fakes, r.mask, Provenance::fake_m2);
  r.report.counts_in = {fakes.size()};
  r.report.counts_out = {r.kept.size()};
  r.report.total_in = fakes.size();
  r.report.total_out = r.kept.size();
  r.report.errors = summarize_errors(err);
  return r;
}

/// Overwrites each regression label with clamp(f_t(x), 0, 1); features untouched.
inline Dataset replace_labels(const nn::NetParams& teacher, const Dataset& ds) {
  if (ds.task().is_classification()) throw std::invalid_argument("replace_labels: regression only");
  nn::check_task(teacher.spec, ds.task());
  Dataset out(ds.task(), ds.dim());
  out.reserve(ds.size());
  nn::Activations a;
  for (const auto& s : ds) {
    Sample t = s;
    t.label = ScalarLabel{std::clamp(nn::forward(teacher, s.features, a)[0], 0.0, 1.0)};
    t.provenance = Provenance::fake_m2;
    out.add(std::move(t));
  }
  return out;
}

struct M2Result {
  Dataset processed;  // D^g_rho
  FilterReport report;
};

/// Filtering, then (regression only, unless disabled) label replacement.
/// `filter = false` passes every sample through, which is what rho = 1 does.
inline M2Result run_m2(const nn::NetParams& teacher, const Dataset& fakes, double rho, bool filter = true,
                       bool replacement = true) {
  const bool cls = fakes.task().is_classification();
  if (fakes.empty()) {
    M2Result r{fakes, {}};
    r.report.rho = rho;
    return r;
  }
  FilterResult f = filter ? (cls ? filter_classification(teacher, fakes, rho) : filter_regression(teacher, fakes, rho))
                          : (cls ? filter_classification(teacher, fakes, 1.0) : filter_regression(teacher, fakes, 1.0));
  if (!filter) f.report.rho = rho;
  M2Result r{std::move(f.kept), std::move(f.report)};
  if (!cls && replacement) r.processed = replace_labels(teacher, r.processed);
  return r;
}

}  // namespace cgankd
