#pragma once

#include <vector>

#include "kneehar/config.hpp"
#include "kneehar/dataset_io.hpp"
#include "kneehar/features.hpp"
#include "kneehar/signal.hpp"

namespace kneehar {

/// Preprocesses every recording and cuts it into windows, in dataset order.
inline std::vector<Window> build_windows(const Dataset& ds, const PipelineConfig& cfg) {
  cfg.validate();
  std::vector<Window> out;
  for (const auto& rec : ds.recordings()) {
    auto windows = make_windows(preprocess(rec, cfg), cfg.window_size, cfg.stride, rec.activity,
                                rec.subject_id);
    out.insert(out.end(), std::make_move_iterator(windows.begin()),
               std::make_move_iterator(windows.end()));
  }
  return out;
}

/// Raw-representation instances (one row of window_size angles per window).
inline LabeledMatrix build_raw_matrix(const Dataset& ds, const PipelineConfig& cfg) {
  const auto windows = build_windows(ds, cfg);
  auto m = windows_to_matrix(windows);
  if (m.size() == 0) m.X = Matrix(0, cfg.window_size);
  return m;
}

/// Converts raw instances to the requested representation.
inline LabeledMatrix represent(const LabeledMatrix& raw, Representation r, MedianConvention median) {
  return r == Representation::Raw ? raw : featurize_matrix(raw, median);
}

inline LabeledMatrix build_matrix(const Dataset& ds, const PipelineConfig& cfg, Representation r) {
  return represent(build_raw_matrix(ds, cfg), r, cfg.median);
}

}  // namespace kneehar
