#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kneehar/activity.hpp"
#include "kneehar/config.hpp"
#include "kneehar/dataset_io.hpp"
#include "kneehar/error.hpp"

namespace kneehar {

/// Uniformly sampled knee angle (degrees).
struct TimeSeries {
  std::vector<double> samples;
  double rate_hz = 0.0;
};

/// A fixed-length slice of a preprocessed recording; one classification
/// instance.
struct Window {
  std::vector<double> values;
  Activity label = Activity::Gait;
  int subject_id = 0;
  std::size_t offset = 0;  // start index in the preprocessed series
};

/// Biquad in transposed direct form II, a[0] == 1. First-order sections
/// carry zero b[2] and a[2].
struct SecondOrderSection {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

/// Digital Butterworth low-pass of the given order via the bilinear
/// transform with cutoff prewarping. Every section has unit DC gain.
inline std::vector<SecondOrderSection> butterworth_lowpass(int order, double cutoff_hz,
                                                           double rate_hz) {
  if (order < 1) throw UsageError("filter order must be >= 1");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0)) {
    throw UsageError("cutoff " + std::to_string(cutoff_hz) + " Hz must lie in (0, " +
                     std::to_string(rate_hz / 2.0) + ") Hz for a " + std::to_string(rate_hz) +
                     " Hz signal");
  }
  const double fs2 = 2.0 * rate_hz;
  const double warped = fs2 * std::tan(std::numbers::pi * cutoff_hz / rate_hz);
  auto to_z = [&](std::complex<double> s) { return (fs2 + s) / (fs2 - s); };

  std::vector<SecondOrderSection> sections;
  for (int k = 0; k < order / 2; ++k) {
    const double angle = std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
    const auto z = to_z(warped * std::polar(1.0, angle));
    SecondOrderSection sec;
    sec.a = {1.0, -2.0 * z.real(), std::norm(z)};
    const double gain = (1.0 + sec.a[1] + sec.a[2]) / 4.0;
    sec.b = {gain, 2.0 * gain, gain};
    sections.push_back(sec);
  }
  if (order % 2 == 1) {
    const double z = to_z({-warped, 0.0}).real();
    SecondOrderSection sec;
    sec.a = {1.0, -z, 0.0};
    const double gain = (1.0 - z) / 2.0;
    sec.b = {gain, gain, 0.0};
    sections.push_back(sec);
  }
  return sections;
}

namespace detail {

// Steady-state section states for a unit step, so that filtering a
// constant starting at x0 produces no transient when scaled by x0.
inline std::vector<std::array<double, 2>> step_initial_state(
    std::span<const SecondOrderSection> sos) {
  std::vector<std::array<double, 2>> zi;
  double scale = 1.0;
  for (const auto& s : sos) {
    const double gain = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
    const double z2 = s.b[2] - s.a[2] * gain;
    const double z1 = s.b[1] - s.a[1] * gain + z2;
    zi.push_back({z1 * scale, z2 * scale});
    scale *= gain;
  }
  return zi;
}

inline void sos_filter_inplace(std::span<const SecondOrderSection> sos, std::vector<double>& x,
                               std::vector<std::array<double, 2>> state) {
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const auto& s = sos[k];
    double z1 = state[k][0];
    double z2 = state[k][1];
    for (double& v : x) {
      const double in = v;
      const double out = s.b[0] * in + z1;
      z1 = s.b[1] * in - s.a[1] * out + z2;
      z2 = s.b[2] * in - s.a[2] * out;
      v = out;
    }
  }
}

}  // namespace detail

/// Number of reflected samples added at each end before forward-backward
/// filtering: 3 * (2 * sections + 1), at least three times the order.
inline std::size_t zero_phase_padding(std::size_t n_sections) { return 3 * (2 * n_sections + 1); }

/// Forward-backward application of `sos` with odd reflective padding and
/// steady-state initial conditions. Net phase is zero and the magnitude
/// response is squared.
inline std::vector<double> filtfilt(std::span<const SecondOrderSection> sos,
                                    std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t pad = std::min(zero_phase_padding(sos.size()), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = detail::step_initial_state(sos);
  auto scaled = [&](double x0) {
    auto z = zi;
    for (auto& s : z) {
      s[0] *= x0;
      s[1] *= x0;
    }
    return z;
  };
  detail::sos_filter_inplace(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  detail::sos_filter_inplace(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

/// Zero-phase Butterworth low-pass.
inline TimeSeries lowpass_zero_phase(const TimeSeries& ts, double cutoff_hz, int order) {
  const auto sos = butterworth_lowpass(order, cutoff_hz, ts.rate_hz);
  return {filtfilt(sos, ts.samples), ts.rate_hz};
}

/// Keeps every k-th sample from index 0, where k = rate / target must be a
/// positive integer.
inline TimeSeries downsample(const TimeSeries& ts, double target_hz) {
  if (!(target_hz > 0.0)) throw UsageError("target rate must be positive");
  const double ratio = ts.rate_hz / target_hz;
  const double k = std::round(ratio);
  if (k < 1.0 || std::abs(ratio - k) > 1e-9) {
    throw UsageError("cannot decimate " + std::to_string(ts.rate_hz) + " Hz to " +
                     std::to_string(target_hz) + " Hz: ratio " + std::to_string(ratio) +
                     " is not a positive integer");
  }
  const auto step = static_cast<std::size_t>(k);
  TimeSeries out{{}, target_hz};
  out.samples.reserve(ts.samples.size() / step + 1);
  for (std::size_t i = 0; i < ts.samples.size(); i += step) out.samples.push_back(ts.samples[i]);
  return out;
}

/// Number of windows make_windows emits.
constexpr std::size_t window_count(std::size_t length, std::size_t size, std::size_t stride) {
  if (size == 0 || stride == 0 || length < size) return 0;
  return (length - size) / stride + 1;
}

inline std::vector<Window> make_windows(const TimeSeries& ts, std::size_t size, std::size_t stride,
                                        Activity label, int subject) {
  if (size < 1 || stride < 1) throw UsageError("window size and stride must be >= 1");
  const std::size_t count = window_count(ts.samples.size(), size, stride);
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    out.push_back({std::vector<double>(ts.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                       ts.samples.begin() + static_cast<std::ptrdiff_t>(start + size)),
                   label, subject, start});
  }
  return out;
}

/// Low-pass at the source rate, then decimate.
inline TimeSeries preprocess(const RawRecording& rec, const PipelineConfig& cfg) {
  const TimeSeries raw{rec.samples, rec.source_rate_hz};
  return downsample(lowpass_zero_phase(raw, cfg.cutoff_hz, cfg.filter_order), cfg.target_hz);
}

}  // namespace kneehar
