#pragma once

// Central finite-difference verification of the double-precision cores,
// shared between the unit tests and the acceptance suite.

#include <cmath>
#include <vector>

#include "amcbench/nn_cores.hpp"

namespace amcbench::testutil {

struct GradCheckResult {
  double param_rel_err = 0.0;
  double input_rel_err = 0.0;
};

template <class Core>
GradCheckResult gradcheck(const Core& core, int in_dim, int batch,
                          uint64_t seed) {
  Rng rng(seed);
  std::vector<double> params(core.n_params());
  core.init(params.data(), rng);

  Mat<double> x(in_dim, batch);
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < in_dim; ++i) x(i, b) = rng.normal();
  std::vector<uint16_t> labels(batch);
  for (auto& y : labels)
    y = static_cast<uint16_t>(rng.uniform_int(
        static_cast<uint64_t>(core.n_classes)));

  auto loss_at = [&](const std::vector<double>& p, const Mat<double>& xx) {
    Mat<double> logits;
    core.forward(p.data(), xx, logits, nullptr);
    return softmax_ce<double>(logits, labels, nullptr);
  };

  std::vector<double> analytic(params.size(), 0.0);
  Mat<double> dx;
  {
    typename Core::Cache cache;
    Mat<double> logits, dlogits;
    core.forward(params.data(), x, logits, &cache);
    softmax_ce<double>(logits, labels, &dlogits);
    core.backward(params.data(), cache, dlogits, analytic.data(), &dx);
  }

  const double h = 1e-6;
  GradCheckResult res;
  {
    double num = 0.0, den_a = 0.0, den_f = 0.0;
    std::vector<double> p = params;
    for (size_t i = 0; i < p.size(); ++i) {
      const double keep = p[i];
      p[i] = keep + h;
      const double lp = loss_at(p, x);
      p[i] = keep - h;
      const double lm = loss_at(p, x);
      p[i] = keep;
      const double fd = (lp - lm) / (2 * h);
      num += (analytic[i] - fd) * (analytic[i] - fd);
      den_a += analytic[i] * analytic[i];
      den_f += fd * fd;
    }
    res.param_rel_err =
        std::sqrt(num) / std::max({std::sqrt(den_a), std::sqrt(den_f), 1e-12});
  }
  {
    double num = 0.0, den_a = 0.0, den_f = 0.0;
    Mat<double> xx = x;
    for (int b = 0; b < batch; ++b)
      for (int i = 0; i < in_dim; ++i) {
        const double keep = xx(i, b);
        xx(i, b) = keep + h;
        const double lp = loss_at(params, xx);
        xx(i, b) = keep - h;
        const double lm = loss_at(params, xx);
        xx(i, b) = keep;
        const double fd = (lp - lm) / (2 * h);
        const double a = dx(i, b);
        num += (a - fd) * (a - fd);
        den_a += a * a;
        den_f += fd * fd;
      }
    res.input_rel_err =
        std::sqrt(num) / std::max({std::sqrt(den_a), std::sqrt(den_f), 1e-12});
  }
  return res;
}

inline MlpCore<double> small_mlp() {
  MlpCore<double> c;
  c.in_dim = 32;
  c.hidden = {6, 5};
  c.n_classes = 3;
  return c;
}

inline CnnCore<double> small_cnn() {
  CnnCore<double> c;
  c.n = 12;
  c.m = 2;
  c.n_classes = 3;
  c.f1 = 2;
  c.k1 = 3;
  c.f2 = 3;
  c.k2 = 2;
  c.dense = 4;
  return c;
}

inline GruCore<double> small_gru() {
  GruCore<double> c;
  c.n_steps = 6;
  c.in_dim = 4;
  c.hidden = 5;
  c.n_classes = 3;
  return c;
}

}  // namespace amcbench::testutil
