#pragma once

#include <vector>

#include "framer/backbone.hpp"

namespace framer {

// Plain Adam over named parameter tensors.
class Adam {
 public:
  explicit Adam(std::vector<NamedParam>* params, double lr = 1e-3,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void add_params(std::vector<NamedParam>* params);
  void step();
  void zero_grad();
  double lr() const { return lr_; }

 private:
  struct Slot {
    Tensor tensor;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace framer
