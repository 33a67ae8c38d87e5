#pragma once

#include <string>

#include "cslm/matrix.hpp"

namespace cslm {

enum class Task { regression, classification };

inline std::string to_string(Task task) {
  return task == Task::regression ? "regression" : "classification";
}

inline Task task_from_string(const std::string& s) {
  if (s == "regression") return Task::regression;
  if (s == "classification") return Task::classification;
  throw std::invalid_argument("unknown task: " + s);
}

// Per-observation linear coefficients plus the optional unpenalized intercept.
struct CoefficientMatrix {
  Matrix values;     // n x p
  Vector intercept;  // n, empty when the model has no intercept
};

}  // namespace cslm
