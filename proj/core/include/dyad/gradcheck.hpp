#pragma once

#include <functional>
#include <vector>

#include "dyad/tensor.hpp"

namespace dyad {

// f evaluates the scalar loss at the given parameter values; it must be a
// pure function of params (it typically builds a fresh tape internally).
using ScalarFn = std::function<double(const std::vector<Tensor>&)>;

// Central-difference gradients of f at params, one tensor per parameter.
std::vector<Tensor> finite_diff_grad(const ScalarFn& f, std::vector<Tensor> params,
                                     double eps = 1e-5);

// Max over all coordinates of |analytic - numeric| / max(1e-6, |analytic| + |numeric|).
double grad_check(const ScalarFn& f, const std::vector<Tensor>& params,
                  const std::vector<Tensor>& analytic, double eps = 1e-5);

}  // namespace dyad
