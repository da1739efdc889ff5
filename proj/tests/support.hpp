#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "camix/tensor.hpp"

namespace testsup {

inline camix::Tensor random_tensor(camix::Shape shape, std::mt19937_64& rng,
                                   double scale = 1.0,
                                   bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  std::vector<double> d(camix::shape_size(shape));
  for (double& v : d) v = dist(rng);
  return camix::Tensor(std::move(d), std::move(shape), requires_grad);
}

// Central-difference gradient check. make_loss rebuilds the scalar loss
// from the current contents of `inputs` on every call; the analytic path
// and the numeric path therefore share one implementation of the forward.
inline double max_grad_rel_error(
    std::vector<camix::Tensor> inputs,
    const std::function<camix::Tensor()>& make_loss, double h = 1e-5) {
  for (camix::Tensor& t : inputs) t.zero_grad();
  camix::Tensor loss = make_loss();
  camix::backward(loss);

  double worst = 0.0;
  for (camix::Tensor& t : inputs) {
    const std::vector<double> analytic = t.grad();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + h;
      const double fp = make_loss().item();
      t.data()[i] = saved - h;
      const double fm = make_loss().item();
      t.data()[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace testsup
