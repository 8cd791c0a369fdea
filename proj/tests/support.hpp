#pragma once

#include "echem/observer.hpp"

namespace echem::testing {

// Loaded once per test binary; the shipped data set is the reference cell.
inline const CellModel& reference_model() {
  static const CellModel model = load_cell_model(default_data_dir());
  return model;
}

inline const CellParameters& reference_cell() { return reference_model().params; }

}  // namespace echem::testing
