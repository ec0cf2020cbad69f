#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctxlm/autodiff.hpp"

namespace ctxlm {

struct ParameterGradError {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParameterGradError> parameters;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Builds a scalar (1x1) loss on the given tape. It must call
/// Tape::parameter for every Parameter under test and be deterministic.
using ScalarFunction = std::function<Var(Tape&)>;

/// Compares tape gradients against central differences
/// (f(x + eps) - f(x - eps)) / 2eps for every element of every parameter.
///
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor);
/// the floor keeps round-off on near-zero gradients from reading as failure.
GradCheckReport check_gradients(const ScalarFunction& f, std::span<Parameter* const> params, double eps = 1e-5,
                                double tol = 1e-4, double floor = 1e-5);

}  // namespace ctxlm
