#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kneehar/config.hpp"
#include "kneehar/error.hpp"
#include "kneehar/matrix.hpp"
#include "kneehar/signal.hpp"
#include "kneehar/text.hpp"

namespace kneehar {

/// Summary statistics of one window, in degrees. std is the population
/// standard deviation (divide by n); mad is the mean absolute deviation
/// about the mean.
struct FeatureVector {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  double mad = 0.0;

  std::array<double, 6> as_array() const { return {min, max, mean, median, std, mad}; }
  bool operator==(const FeatureVector&) const = default;
};

inline constexpr std::array<std::string_view, 6> kFeatureNames = {"min",    "max", "mean",
                                                                  "median", "std", "mad"};

inline FeatureVector extract_features(std::span<const double> values,
                                      MedianConvention median = MedianConvention::Midpoint) {
  if (values.empty()) throw DataError("cannot extract features from an empty window");
  const std::size_t n = values.size();
  const double dn = static_cast<double>(n);

  FeatureVector f;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  f.min = *lo;
  f.max = *hi;

  double sum = 0.0;
  for (double v : values) sum += v;
  f.mean = std::clamp(sum / dn, f.min, f.max);  // rounding can overshoot

  double sq = 0.0;
  double abs_dev = 0.0;
  for (double v : values) {
    const double d = v - f.mean;
    sq += d * d;
    abs_dev += std::abs(d);
  }
  f.std = std::sqrt(sq / dn);
  f.mad = abs_dev / dn;

  std::vector<double> sorted(values.begin(), values.end());
  const std::size_t mid = n / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  const double upper = sorted[mid];
  if (n % 2 == 1) {
    f.median = upper;
  } else {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
    f.median = median == MedianConvention::Midpoint ? std::midpoint(lower, upper) : lower;
  }
  return f;
}

inline FeatureVector extract_features(const Window& w,
                                      MedianConvention median = MedianConvention::Midpoint) {
  return extract_features(std::span<const double>(w.values), median);
}

/// Rows of classification instances with their provenance.
struct LabeledMatrix {
  Matrix X;
  std::vector<int> labels;
  std::vector<int> subjects;
  std::vector<std::size_t> offsets;
  std::vector<std::string> column_names;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Raw representation: each window's values become one row.
inline LabeledMatrix windows_to_matrix(std::span<const Window> windows) {
  LabeledMatrix out;
  const std::size_t width = windows.empty() ? 0 : windows.front().values.size();
  out.X = Matrix(0, width);
  for (std::size_t i = 0; i < width; ++i) out.column_names.push_back("x" + std::to_string(i));
  for (const auto& w : windows) {
    if (w.values.size() != width) throw DataError("windows differ in length");
    out.X.append_row(w.values);
    out.labels.push_back(activity_code(w.label));
    out.subjects.push_back(w.subject_id);
    out.offsets.push_back(w.offset);
  }
  return out;
}

/// Feature representation: row i holds extract_features(windows[i]) in
/// kFeatureNames column order.
inline LabeledMatrix featurize_all(std::span<const Window> windows,
                                   MedianConvention median = MedianConvention::Midpoint) {
  LabeledMatrix out;
  out.X = Matrix(0, kFeatureNames.size());
  for (auto name : kFeatureNames) out.column_names.emplace_back(name);
  const std::size_t width = windows.empty() ? 0 : windows.front().values.size();
  for (const auto& w : windows) {
    if (w.values.size() != width) throw DataError("windows differ in length");
    out.X.append_row(extract_features(w, median).as_array());
    out.labels.push_back(activity_code(w.label));
    out.subjects.push_back(w.subject_id);
    out.offsets.push_back(w.offset);
  }
  return out;
}

/// Same as featurize_all but starting from a raw-representation matrix.
inline LabeledMatrix featurize_matrix(const LabeledMatrix& raw,
                                      MedianConvention median = MedianConvention::Midpoint) {
  LabeledMatrix out;
  out.X = Matrix(0, kFeatureNames.size());
  for (auto name : kFeatureNames) out.column_names.emplace_back(name);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.X.append_row(extract_features(raw.X.row(i), median).as_array());
  }
  out.labels = raw.labels;
  out.subjects = raw.subjects;
  out.offsets = raw.offsets;
  return out;
}

/// Delimited text with a header row: subject,activity,offset,<columns...>.
inline void write_labeled_matrix(std::ostream& out, const LabeledMatrix& m) {
  out << "subject,activity,offset";
  for (const auto& c : m.column_names) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto label = activity_from_code(m.labels[i]);
    out << m.subjects[i] << ',' << (label ? activity_name(*label) : "unknown") << ','
        << m.offsets[i];
    for (double v : m.X.row(i)) out << ',' << text::format_double(v);
    out << '\n';
  }
}

}  // namespace kneehar
