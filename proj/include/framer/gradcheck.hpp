#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "framer/tensor.hpp"

namespace framer {

struct GradCheckReport {
  struct Entry {
    std::string name;
    double max_rel_err = 0.0;
  };
  std::vector<Entry> entries;
  double max_rel_err = 0.0;
  double h = 0.0;
  double tol = 0.0;
  bool pass = false;
};

// Compares reverse-mode gradients of the scalar f() against central finite
// differences over every element of every listed parameter. f must be
// deterministic: any stochastic choice (negative-layer draws, batch order)
// has to be frozen by the caller before checking.
//
// Relative error uses a unit floor, |ad - fd| / max(|ad|, |fd|, 1), so that
// near-zero gradients are judged on absolute terms.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double h, double tol);

}  // namespace framer
