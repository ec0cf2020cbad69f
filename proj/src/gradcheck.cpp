#include "ctxlm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctxlm {

namespace {

double evaluate(const ScalarFunction& f) {
  Tape tape;
  const double v = tape.value(f(tape)).item();
  if (!std::isfinite(v)) throw NonFiniteError("gradient check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport check_gradients(const ScalarFunction& f, std::span<Parameter* const> params, double eps, double tol,
                                double floor) {
  if (!(eps > 0.0)) throw std::invalid_argument("gradient check: eps must be positive");

  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = f(tape);
    if (!std::isfinite(tape.value(loss).item())) throw NonFiniteError("gradient check: loss is not finite");
    tape.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = tol;
  for (Parameter* p : params) {
    ParameterGradError entry;
    entry.name = p->name;
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = evaluate(f);
      p->value[i] = saved - eps;
      const double down = evaluate(f);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (i == 0 || rel > entry.max_relative_error) {
        entry.max_relative_error = rel;
        entry.worst_index = i;
        entry.analytic = analytic[i];
        entry.numeric = numeric;
      }
    }
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    report.parameters.push_back(std::move(entry));
  }
  report.passed = report.max_relative_error <= tol;
  return report;
}

}  // namespace ctxlm
