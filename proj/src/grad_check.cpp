#include "mpcc/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mpcc {

GradCheckReport finite_difference_check(const TapeFn& f, ParameterStore& params,
                                        const std::vector<std::string>& names,
                                        double step, double tol) {
  if (step <= 0.0) throw std::invalid_argument("finite_difference_check: step must be > 0");

  // Analytic pass.
  params.zero_grads();
  for (const auto& n : names) params.get(n).set_requires_grad(true);
  Tape tape;
  Tensor loss = f(tape);
  tape.backward(loss);
  tape.clear();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(names.size());
  for (const auto& n : names) {
    const Tensor& t = params.get(n);
    const auto* g = t.grad();
    if (g)
      analytic.push_back(*g);
    else
      analytic.push_back(std::vector<double>(t.numel(), 0.0));
  }

  auto eval = [&]() {
    Tape t;
    double v = f(t).value();
    t.clear();
    return v;
  };

  GradCheckReport report;
  report.worst = 0.0;
  for (std::size_t pi = 0; pi < names.size(); ++pi) {
    GradCheckEntry entry;
    entry.name = names[pi];
    Tensor& t = params.get(names[pi]);
    auto& vals = t.values();
    for (long i = 0; i < t.numel(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + step;
      const double fp = eval();
      vals[i] = orig - step;
      const double fm = eval();
      vals[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        entry.finite = false;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      const double rel = std::fabs(a - numeric) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.worst = std::max(report.worst, entry.max_rel_err);
    if (!entry.finite) report.worst = std::numeric_limits<double>::infinity();
    report.per_param.push_back(std::move(entry));
  }
  report.pass = report.worst < tol;
  params.zero_grads();
  return report;
}

}  // namespace mpcc
