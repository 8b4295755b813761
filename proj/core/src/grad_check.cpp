#include <algorithm>
#include <cmath>

#include "disclstm/autodiff.hpp"
#include "disclstm/error.hpp"

namespace disclstm::ad {

GradCheckReport grad_check(const Objective& f, std::vector<Tensor> params, double eps) {
  if (!(eps > 0.0)) throw UsageError("grad_check: eps must be positive");

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) analytic.push_back(Tensor::zeros_like(p));
  const double base = f(params, &analytic);
  if (!std::isfinite(base)) throw NumericError("grad_check: objective is not finite");
  if (analytic.size() != params.size()) {
    throw ShapeError("grad_check: objective returned the wrong number of gradients");
  }

  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!analytic[t].same_shape(params[t])) {
      throw ShapeError("grad_check: gradient shape differs from parameter " + std::to_string(t));
    }
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double saved = params[t][i];
      params[t][i] = saved + eps;
      const double up = f(params, nullptr);
      params[t][i] = saved - eps;
      const double down = f(params, nullptr);
      params[t][i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: objective is not finite near tensor " +
                           std::to_string(t) + " coordinate " + std::to_string(i));
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t][i];
      const double scale = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / scale;
      ++report.coordinates;
      if (err > report.max_relative_error || report.coordinates == 1) {
        report.max_relative_error = err;
        report.worst_tensor = t;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace disclstm::ad
