#include "framer/optim.hpp"

#include <cmath>

namespace framer {

Adam::Adam(std::vector<NamedParam>* params, double lr, double beta1,
           double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (params != nullptr) add_params(params);
}

void Adam::add_params(std::vector<NamedParam>* params) {
  for (auto& p : *params) {
    Slot s;
    s.tensor = p.tensor;
    s.m.assign(p.tensor.numel(), 0.0);
    s.v.assign(p.tensor.numel(), 0.0);
    slots_.push_back(std::move(s));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Slot& s : slots_) {
    auto g = s.tensor.grad();
    auto data = s.tensor.data_mut();
    for (std::size_t i = 0; i < data.size(); ++i) {
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Slot& s : slots_) s.tensor.zero_grad();
}

}  // namespace framer
