#include "framer/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace framer {

GradCheckReport grad_check(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params, double h,
    double tol) {
  GradCheckReport report;
  report.h = h;
  report.tol = tol;

  for (auto& [name, p] : params) p.zero_grad();
  Tensor loss = f();
  if (!std::isfinite(loss.value())) {
    throw std::runtime_error("grad_check: non-finite loss " +
                             std::to_string(loss.value()));
  }
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& [name, p] : params) {
    auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  auto eval = [&]() {
    NoGradGuard guard;
    Tensor v = f();
    const double y = v.value();
    if (!std::isfinite(y)) {
      throw std::runtime_error("grad_check: non-finite loss during probing");
    }
    return y;
  };

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    auto data = p.data_mut();
    GradCheckReport::Entry entry{params[pi].first, 0.0};
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = eval();
      data[i] = keep - h;
      const double dn = eval();
      data[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double ad = analytic[pi][i];
      const double denom = std::max({std::abs(ad), std::abs(fd), 1.0});
      entry.max_rel_err = std::max(entry.max_rel_err, std::abs(ad - fd) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace framer
