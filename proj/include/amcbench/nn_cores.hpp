#pragma once

// Architecture cores, templated on the scalar type. The float instantiation
// is the production path (checkpoints round-trip bit-exactly through f32);
// the double instantiation exists for finite-difference gradient checks.
//
// Every core works on batches laid out as Eigen column-major matrices with
// one example per column. The input column is the flattened M*N*2 received
// tensor in [symbol][sample][re,im] order. Parameters live in one flat
// vector; cores expose the offset of the final dense block so tests can zero
// the output layer.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "amcbench/common.hpp"

namespace amcbench {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

template <class Scalar>
Eigen::Map<Mat<Scalar>> param_block(Scalar* p, size_t& off, int rows, int cols) {
  Eigen::Map<Mat<Scalar>> m(p + off, rows, cols);
  off += static_cast<size_t>(rows) * cols;
  return m;
}

template <class Scalar>
Eigen::Map<const Mat<Scalar>> param_block(const Scalar* p, size_t& off,
                                          int rows, int cols) {
  Eigen::Map<const Mat<Scalar>> m(p + off, rows, cols);
  off += static_cast<size_t>(rows) * cols;
  return m;
}

// Fan-in-scaled uniform init over one dense block (weights and bias).
template <class Scalar>
void init_dense(Scalar* p, size_t& off, int rows, int cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  const size_t n = static_cast<size_t>(rows) * cols + rows;
  for (size_t i = 0; i < n; ++i)
    p[off + i] = static_cast<Scalar>(rng.uniform(-bound, bound));
  off += n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MLP: flatten -> (dense + relu)* -> dense logits.
// ---------------------------------------------------------------------------

template <class Scalar>
struct MlpCore {
  int in_dim = 0;
  std::vector<int> hidden;
  int n_classes = 0;

  struct Cache {
    Mat<Scalar> x;
    std::vector<Mat<Scalar>> acts;  // post-relu hidden activations
  };

  std::vector<int> layer_sizes() const {
    std::vector<int> s{in_dim};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(n_classes);
    return s;
  }

  size_t n_params() const {
    const auto s = layer_sizes();
    size_t n = 0;
    for (size_t i = 0; i + 1 < s.size(); ++i)
      n += static_cast<size_t>(s[i + 1]) * s[i] + s[i + 1];
    return n;
  }

  size_t output_offset() const {
    const auto s = layer_sizes();
    size_t n = 0;
    for (size_t i = 0; i + 2 < s.size(); ++i)
      n += static_cast<size_t>(s[i + 1]) * s[i] + s[i + 1];
    return n;
  }

  int penultimate_width() const { return hidden.empty() ? in_dim : hidden.back(); }

  void init(Scalar* p, Rng& rng) const {
    const auto s = layer_sizes();
    size_t off = 0;
    for (size_t i = 0; i + 1 < s.size(); ++i)
      detail::init_dense(p, off, s[i + 1], s[i], rng);
  }

  void forward(const Scalar* p, const Mat<Scalar>& x, Mat<Scalar>& logits,
               Cache* cache) const {
    const auto s = layer_sizes();
    size_t off = 0;
    Mat<Scalar> a = x;
    if (cache) {
      cache->x = x;
      cache->acts.clear();
    }
    for (size_t i = 0; i + 1 < s.size(); ++i) {
      auto w = detail::param_block(p, off, s[i + 1], s[i]);
      auto b = detail::param_block(p, off, s[i + 1], 1);
      Mat<Scalar> z = (w * a).colwise() + b.col(0);
      if (i + 2 < s.size()) {
        a = z.cwiseMax(Scalar(0));
        if (cache) cache->acts.push_back(a);
      } else {
        logits = std::move(z);
      }
    }
  }

  void backward(const Scalar* p, const Cache& cache, const Mat<Scalar>& dlogits,
                Scalar* grad, Mat<Scalar>* dx) const {
    const auto s = layer_sizes();
    std::vector<size_t> offs(s.size() - 1);
    {
      size_t off = 0;
      for (size_t i = 0; i + 1 < s.size(); ++i) {
        offs[i] = off;
        off += static_cast<size_t>(s[i + 1]) * s[i] + s[i + 1];
      }
    }
    Mat<Scalar> dz = dlogits;
    for (size_t i = s.size() - 2;; --i) {
      const Mat<Scalar>& a_prev = (i == 0) ? cache.x : cache.acts[i - 1];
      size_t off = offs[i];
      auto w = detail::param_block(p, off, s[i + 1], s[i]);
      size_t goff = offs[i];
      auto gw = detail::param_block(grad, goff, s[i + 1], s[i]);
      auto gb = detail::param_block(grad, goff, s[i + 1], 1);
      gw.noalias() += dz * a_prev.transpose();
      gb.col(0) += dz.rowwise().sum();
      if (i == 0) {
        if (dx) *dx = w.transpose() * dz;
        break;
      }
      Mat<Scalar> da = w.transpose() * dz;
      dz = da.cwiseProduct(
          (cache.acts[i - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
  }

  void penultimate(const Scalar* p, const Mat<Scalar>& x, Mat<Scalar>& h) const {
    if (hidden.empty()) {
      h = x;
      return;
    }
    const auto s = layer_sizes();
    size_t off = 0;
    Mat<Scalar> a = x;
    for (size_t i = 0; i + 2 < s.size(); ++i) {
      auto w = detail::param_block(p, off, s[i + 1], s[i]);
      auto b = detail::param_block(p, off, s[i + 1], 1);
      a = ((w * a).colwise() + b.col(0)).cwiseMax(Scalar(0));
    }
    h = std::move(a);
  }
};

// ---------------------------------------------------------------------------
// CNN: per symbol, 2D filters over the N x 2 sample plane (kernel k x 2),
// relu, width-2 max pool, a second conv over the feature maps, relu, pool,
// then feature maps averaged across the M symbols and fed to a dense head.
// ---------------------------------------------------------------------------

template <class Scalar>
struct CnnCore {
  int n = 0;          // samples per symbol
  int m = 0;          // symbols per frame
  int n_classes = 0;
  int f1 = 8, k1 = 8;
  int f2 = 16, k2 = 5;
  int dense = 64;

  int l1() const { return n - k1 + 1; }
  int p1() const { return l1() / 2; }
  int l2() const { return p1() - k2 + 1; }
  int p2() const { return l2() / 2; }
  int flat() const { return p2() * f2; }

  void check_dims() const {
    if (l1() < 2 || l2() < 2)
      throw std::invalid_argument("cnn kernels too large for symbol length");
  }

  struct Cache {
    Mat<Scalar> x;
    // per symbol: post-relu conv outputs, pooled maps, and pool argmaxes
    std::vector<Mat<Scalar>> out1, pool1, out2, pool2;
    std::vector<std::vector<int>> arg1, arg2;
    Mat<Scalar> feat;  // flat x B, symbol-averaged
    Mat<Scalar> h;     // dense x B, post-relu
  };

  size_t n_params() const {
    return static_cast<size_t>(f1) * (k1 * 2) + f1 +
           static_cast<size_t>(f2) * (k2 * f1) + f2 +
           static_cast<size_t>(dense) * flat() + dense +
           static_cast<size_t>(n_classes) * dense + n_classes;
  }

  size_t output_offset() const {
    return n_params() - (static_cast<size_t>(n_classes) * dense + n_classes);
  }

  int penultimate_width() const { return dense; }

  void init(Scalar* p, Rng& rng) const {
    size_t off = 0;
    detail::init_dense(p, off, f1, k1 * 2, rng);
    detail::init_dense(p, off, f2, k2 * f1, rng);
    detail::init_dense(p, off, dense, flat(), rng);
    detail::init_dense(p, off, n_classes, dense, rng);
  }

  // column t of the im2col matrix for (example b, position t) holds the
  // k x 2 patch at sample offset t, interleaved as the input layout
  void im2col1(const Mat<Scalar>& x, int sym, int b, Mat<Scalar>& col) const {
    for (int t = 0; t < l1(); ++t)
      for (int kk = 0; kk < k1; ++kk) {
        const int base = (sym * n + t + kk) * 2;
        col(2 * kk + 0, t) = x(base + 0, b);
        col(2 * kk + 1, t) = x(base + 1, b);
      }
  }

  void forward(const Scalar* p, const Mat<Scalar>& x, Mat<Scalar>& logits,
               Cache* cache) const {
    check_dims();
    const int B = static_cast<int>(x.cols());
    size_t off = 0;
    auto w1 = detail::param_block(p, off, f1, k1 * 2);
    auto b1 = detail::param_block(p, off, f1, 1);
    auto w2 = detail::param_block(p, off, f2, k2 * f1);
    auto b2 = detail::param_block(p, off, f2, 1);
    auto wd = detail::param_block(p, off, dense, flat());
    auto bd = detail::param_block(p, off, dense, 1);
    auto wo = detail::param_block(p, off, n_classes, dense);
    auto bo = detail::param_block(p, off, n_classes, 1);

    Mat<Scalar> feat = Mat<Scalar>::Zero(flat(), B);
    if (cache) {
      cache->x = x;
      cache->out1.assign(m, {});
      cache->pool1.assign(m, {});
      cache->out2.assign(m, {});
      cache->pool2.assign(m, {});
      cache->arg1.assign(m, {});
      cache->arg2.assign(m, {});
    }

    Mat<Scalar> col1(k1 * 2, l1()), col2(k2 * f1, l2());
    for (int sym = 0; sym < m; ++sym) {
      Mat<Scalar> out1(f1, l1() * B), pool1(f1, p1() * B);
      Mat<Scalar> out2(f2, l2() * B), pool2(f2, p2() * B);
      std::vector<int> arg1(static_cast<size_t>(f1) * p1() * B);
      std::vector<int> arg2(static_cast<size_t>(f2) * p2() * B);
      for (int b = 0; b < B; ++b) {
        im2col1(x, sym, b, col1);
        out1.middleCols(b * l1(), l1()) =
            ((w1 * col1).colwise() + b1.col(0)).cwiseMax(Scalar(0));
        for (int t = 0; t < p1(); ++t)
          for (int f = 0; f < f1; ++f) {
            const Scalar a = out1(f, b * l1() + 2 * t);
            const Scalar c = out1(f, b * l1() + 2 * t + 1);
            const int pick = a >= c ? 0 : 1;
            pool1(f, b * p1() + t) = pick ? c : a;
            arg1[(static_cast<size_t>(b) * p1() + t) * f1 + f] = pick;
          }
        for (int t = 0; t < l2(); ++t)
          for (int kk = 0; kk < k2; ++kk)
            col2.block(kk * f1, t, f1, 1) = pool1.col(b * p1() + t + kk);
        out2.middleCols(b * l2(), l2()) =
            ((w2 * col2).colwise() + b2.col(0)).cwiseMax(Scalar(0));
        for (int t = 0; t < p2(); ++t)
          for (int f = 0; f < f2; ++f) {
            const Scalar a = out2(f, b * l2() + 2 * t);
            const Scalar c = out2(f, b * l2() + 2 * t + 1);
            const int pick = a >= c ? 0 : 1;
            pool2(f, b * p2() + t) = pick ? c : a;
            arg2[(static_cast<size_t>(b) * p2() + t) * f2 + f] = pick;
          }
        for (int t = 0; t < p2(); ++t)
          for (int f = 0; f < f2; ++f)
            feat(t * f2 + f, b) += pool2(f, b * p2() + t);
      }
      if (cache) {
        cache->out1[sym] = std::move(out1);
        cache->pool1[sym] = std::move(pool1);
        cache->out2[sym] = std::move(out2);
        cache->pool2[sym] = std::move(pool2);
        cache->arg1[sym] = std::move(arg1);
        cache->arg2[sym] = std::move(arg2);
      }
    }
    feat /= Scalar(m);

    Mat<Scalar> h = ((wd * feat).colwise() + bd.col(0)).cwiseMax(Scalar(0));
    logits = (wo * h).colwise() + bo.col(0);
    if (cache) {
      cache->feat = std::move(feat);
      cache->h = std::move(h);
    }
  }

  void backward(const Scalar* p, const Cache& cache, const Mat<Scalar>& dlogits,
                Scalar* grad, Mat<Scalar>* dx) const {
    const int B = static_cast<int>(cache.x.cols());
    size_t off = 0;
    auto w1 = detail::param_block(p, off, f1, k1 * 2);
    off += f1;
    auto w2 = detail::param_block(p, off, f2, k2 * f1);
    off += f2;
    auto wd = detail::param_block(p, off, dense, flat());
    off += dense;
    auto wo = detail::param_block(p, off, n_classes, dense);

    size_t goff = 0;
    auto gw1 = detail::param_block(grad, goff, f1, k1 * 2);
    auto gb1 = detail::param_block(grad, goff, f1, 1);
    auto gw2 = detail::param_block(grad, goff, f2, k2 * f1);
    auto gb2 = detail::param_block(grad, goff, f2, 1);
    auto gwd = detail::param_block(grad, goff, dense, flat());
    auto gbd = detail::param_block(grad, goff, dense, 1);
    auto gwo = detail::param_block(grad, goff, n_classes, dense);
    auto gbo = detail::param_block(grad, goff, n_classes, 1);

    gwo.noalias() += dlogits * cache.h.transpose();
    gbo.col(0) += dlogits.rowwise().sum();
    Mat<Scalar> dh = wo.transpose() * dlogits;
    dh = dh.cwiseProduct(
        (cache.h.array() > Scalar(0)).template cast<Scalar>().matrix());
    gwd.noalias() += dh * cache.feat.transpose();
    gbd.col(0) += dh.rowwise().sum();
    Mat<Scalar> dfeat = (wd.transpose() * dh) / Scalar(m);

    if (dx) dx->setZero(cache.x.rows(), B);
    Mat<Scalar> col1(k1 * 2, l1()), col2(k2 * f1, l2());
    for (int sym = 0; sym < m; ++sym) {
      for (int b = 0; b < B; ++b) {
        // pool2 backward into conv2 output
        Mat<Scalar> dout2 = Mat<Scalar>::Zero(f2, l2());
        for (int t = 0; t < p2(); ++t)
          for (int f = 0; f < f2; ++f) {
            const int pick =
                cache.arg2[sym][(static_cast<size_t>(b) * p2() + t) * f2 + f];
            dout2(f, 2 * t + pick) = dfeat(t * f2 + f, b);
          }
        dout2 = dout2.cwiseProduct(
            (cache.out2[sym].middleCols(b * l2(), l2()).array() > Scalar(0))
                .template cast<Scalar>()
                .matrix());
        // conv2 gradients
        for (int t = 0; t < l2(); ++t)
          for (int kk = 0; kk < k2; ++kk)
            col2.block(kk * f1, t, f1, 1) =
                cache.pool1[sym].col(b * p1() + t + kk);
        gw2.noalias() += dout2 * col2.transpose();
        gb2.col(0) += dout2.rowwise().sum();
        Mat<Scalar> dcol2 = w2.transpose() * dout2;  // (k2*f1) x l2
        Mat<Scalar> dpool1 = Mat<Scalar>::Zero(f1, p1());
        for (int t = 0; t < l2(); ++t)
          for (int kk = 0; kk < k2; ++kk)
            dpool1.col(t + kk) += dcol2.block(kk * f1, t, f1, 1);
        // pool1 backward into conv1 output
        Mat<Scalar> dout1 = Mat<Scalar>::Zero(f1, l1());
        for (int t = 0; t < p1(); ++t)
          for (int f = 0; f < f1; ++f) {
            const int pick =
                cache.arg1[sym][(static_cast<size_t>(b) * p1() + t) * f1 + f];
            dout1(f, 2 * t + pick) = dpool1(f, t);
          }
        dout1 = dout1.cwiseProduct(
            (cache.out1[sym].middleCols(b * l1(), l1()).array() > Scalar(0))
                .template cast<Scalar>()
                .matrix());
        im2col1(cache.x, sym, b, col1);
        gw1.noalias() += dout1 * col1.transpose();
        gb1.col(0) += dout1.rowwise().sum();
        if (dx) {
          Mat<Scalar> dcol1 = w1.transpose() * dout1;  // (k1*2) x l1
          for (int t = 0; t < l1(); ++t)
            for (int kk = 0; kk < k1; ++kk) {
              const int base = (sym * n + t + kk) * 2;
              (*dx)(base + 0, b) += dcol1(2 * kk + 0, t);
              (*dx)(base + 1, b) += dcol1(2 * kk + 1, t);
            }
        }
      }
    }
  }

  void penultimate(const Scalar* p, const Mat<Scalar>& x, Mat<Scalar>& h) const {
    Mat<Scalar> logits;
    Cache cache;
    forward(p, x, logits, &cache);
    h = std::move(cache.h);
  }
};

// ---------------------------------------------------------------------------
// GRU over the N-sample sequence; the feature vector at step t stacks the
// [re, im] pair of every symbol at sample t (2M inputs per step). The last
// hidden state feeds the output layer.
// ---------------------------------------------------------------------------

template <class Scalar>
struct GruCore {
  int n_steps = 0;  // N
  int in_dim = 0;   // 2M
  int hidden = 64;
  int n_classes = 0;

  struct Cache {
    Mat<Scalar> x;
    std::vector<Mat<Scalar>> h;       // h_0 .. h_T (T+1 entries)
    std::vector<Mat<Scalar>> z, r, c; // gate activations per step
  };

  size_t gate_params() const {
    return static_cast<size_t>(hidden) * in_dim +
           static_cast<size_t>(hidden) * hidden + hidden;
  }
  size_t n_params() const {
    return 3 * gate_params() + static_cast<size_t>(n_classes) * hidden + n_classes;
  }
  size_t output_offset() const { return 3 * gate_params(); }
  int penultimate_width() const { return hidden; }

  void init(Scalar* p, Rng& rng) const {
    // gate layout: W (hidden x in), U (hidden x hidden), b (hidden);
    // fan-in for a gate is in_dim + hidden
    size_t off = 0;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim + hidden));
    for (int g = 0; g < 3; ++g) {
      for (size_t i = 0; i < gate_params(); ++i)
        p[off + i] = static_cast<Scalar>(rng.uniform(-bound, bound));
      off += gate_params();
    }
    detail::init_dense(p, off, n_classes, hidden, rng);
  }

  void gather_step(const Mat<Scalar>& x, int t, Mat<Scalar>& xt) const {
    const int B = static_cast<int>(x.cols());
    const int m = in_dim / 2;
    for (int b = 0; b < B; ++b)
      for (int s = 0; s < m; ++s) {
        xt(2 * s + 0, b) = x((s * n_steps + t) * 2 + 0, b);
        xt(2 * s + 1, b) = x((s * n_steps + t) * 2 + 1, b);
      }
  }

  static Mat<Scalar> sigmoid(const Mat<Scalar>& z) {
    return (Scalar(1) / (Scalar(1) + (-z.array()).exp())).matrix();
  }

  void forward(const Scalar* p, const Mat<Scalar>& x, Mat<Scalar>& logits,
               Cache* cache) const {
    const int B = static_cast<int>(x.cols());
    size_t off = 0;
    auto wz = detail::param_block(p, off, hidden, in_dim);
    auto uz = detail::param_block(p, off, hidden, hidden);
    auto bz = detail::param_block(p, off, hidden, 1);
    auto wr = detail::param_block(p, off, hidden, in_dim);
    auto ur = detail::param_block(p, off, hidden, hidden);
    auto br = detail::param_block(p, off, hidden, 1);
    auto wc = detail::param_block(p, off, hidden, in_dim);
    auto uc = detail::param_block(p, off, hidden, hidden);
    auto bc = detail::param_block(p, off, hidden, 1);
    auto wo = detail::param_block(p, off, n_classes, hidden);
    auto bo = detail::param_block(p, off, n_classes, 1);

    Mat<Scalar> h = Mat<Scalar>::Zero(hidden, B);
    if (cache) {
      cache->x = x;
      cache->h.assign(1, h);
      cache->z.clear();
      cache->r.clear();
      cache->c.clear();
    }
    Mat<Scalar> xt(in_dim, B);
    for (int t = 0; t < n_steps; ++t) {
      gather_step(x, t, xt);
      Mat<Scalar> z = sigmoid(((wz * xt + uz * h).colwise() + bz.col(0)));
      Mat<Scalar> r = sigmoid(((wr * xt + ur * h).colwise() + br.col(0)));
      Mat<Scalar> c =
          ((wc * xt + uc * r.cwiseProduct(h)).colwise() + bc.col(0))
              .array()
              .tanh()
              .matrix();
      h = (Mat<Scalar>::Ones(hidden, B) - z).cwiseProduct(c) + z.cwiseProduct(h);
      if (cache) {
        cache->z.push_back(std::move(z));
        cache->r.push_back(std::move(r));
        cache->c.push_back(std::move(c));
        cache->h.push_back(h);
      }
    }
    logits = (wo * h).colwise() + bo.col(0);
  }

  void backward(const Scalar* p, const Cache& cache, const Mat<Scalar>& dlogits,
                Scalar* grad, Mat<Scalar>* dx) const {
    const int B = static_cast<int>(cache.x.cols());
    size_t off = 0;
    auto wz = detail::param_block(p, off, hidden, in_dim);
    auto uz = detail::param_block(p, off, hidden, hidden);
    off += hidden;
    auto wr = detail::param_block(p, off, hidden, in_dim);
    auto ur = detail::param_block(p, off, hidden, hidden);
    off += hidden;
    auto wc = detail::param_block(p, off, hidden, in_dim);
    auto uc = detail::param_block(p, off, hidden, hidden);
    off += hidden;
    auto wo = detail::param_block(p, off, n_classes, hidden);

    size_t goff = 0;
    auto gwz = detail::param_block(grad, goff, hidden, in_dim);
    auto guz = detail::param_block(grad, goff, hidden, hidden);
    auto gbz = detail::param_block(grad, goff, hidden, 1);
    auto gwr = detail::param_block(grad, goff, hidden, in_dim);
    auto gur = detail::param_block(grad, goff, hidden, hidden);
    auto gbr = detail::param_block(grad, goff, hidden, 1);
    auto gwc = detail::param_block(grad, goff, hidden, in_dim);
    auto guc = detail::param_block(grad, goff, hidden, hidden);
    auto gbc = detail::param_block(grad, goff, hidden, 1);
    auto gwo = detail::param_block(grad, goff, n_classes, hidden);
    auto gbo = detail::param_block(grad, goff, n_classes, 1);

    gwo.noalias() += dlogits * cache.h.back().transpose();
    gbo.col(0) += dlogits.rowwise().sum();
    Mat<Scalar> dh = wo.transpose() * dlogits;

    if (dx) dx->setZero(cache.x.rows(), B);
    Mat<Scalar> xt(in_dim, B);
    const Mat<Scalar> ones = Mat<Scalar>::Ones(hidden, B);
    for (int t = n_steps - 1; t >= 0; --t) {
      gather_step(cache.x, t, xt);
      const Mat<Scalar>& z = cache.z[t];
      const Mat<Scalar>& r = cache.r[t];
      const Mat<Scalar>& c = cache.c[t];
      const Mat<Scalar>& hprev = cache.h[t];

      Mat<Scalar> dc = dh.cwiseProduct(ones - z);
      Mat<Scalar> dz = dh.cwiseProduct(hprev - c);
      Mat<Scalar> dhprev = dh.cwiseProduct(z);

      // tanh'
      Mat<Scalar> dcpre = dc.cwiseProduct(ones - c.cwiseProduct(c));
      gwc.noalias() += dcpre * xt.transpose();
      guc.noalias() += dcpre * (r.cwiseProduct(hprev)).transpose();
      gbc.col(0) += dcpre.rowwise().sum();
      Mat<Scalar> drh = uc.transpose() * dcpre;
      Mat<Scalar> dr = drh.cwiseProduct(hprev);
      dhprev += drh.cwiseProduct(r);

      // sigmoid'
      Mat<Scalar> dzpre = dz.cwiseProduct(z.cwiseProduct(ones - z));
      Mat<Scalar> drpre = dr.cwiseProduct(r.cwiseProduct(ones - r));
      gwz.noalias() += dzpre * xt.transpose();
      guz.noalias() += dzpre * hprev.transpose();
      gbz.col(0) += dzpre.rowwise().sum();
      gwr.noalias() += drpre * xt.transpose();
      gur.noalias() += drpre * hprev.transpose();
      gbr.col(0) += drpre.rowwise().sum();
      dhprev += uz.transpose() * dzpre + ur.transpose() * drpre;

      if (dx) {
        Mat<Scalar> dxt =
            wz.transpose() * dzpre + wr.transpose() * drpre + wc.transpose() * dcpre;
        const int msym = in_dim / 2;
        for (int b = 0; b < B; ++b)
          for (int s = 0; s < msym; ++s) {
            (*dx)((s * n_steps + t) * 2 + 0, b) += dxt(2 * s + 0, b);
            (*dx)((s * n_steps + t) * 2 + 1, b) += dxt(2 * s + 1, b);
          }
      }
      dh = std::move(dhprev);
    }
  }

  void penultimate(const Scalar* p, const Mat<Scalar>& x, Mat<Scalar>& h) const {
    Mat<Scalar> logits;
    Cache cache;
    forward(p, x, logits, &cache);
    h = cache.h.back();
  }
};

// Stable log-softmax cross-entropy over a logits batch. Returns mean loss;
// fills dlogits with (softmax - onehot)/B when requested.
template <class Scalar>
double softmax_ce(const Mat<Scalar>& logits, const std::vector<uint16_t>& labels,
                  Mat<Scalar>* dlogits, int* n_correct = nullptr) {
  const int B = static_cast<int>(logits.cols());
  double loss = 0.0;
  int correct = 0;
  if (dlogits) dlogits->resize(logits.rows(), B);
  for (int b = 0; b < B; ++b) {
    const auto col = logits.col(b);
    Eigen::Index argmax;
    const Scalar mx = col.maxCoeff(&argmax);
    double denom = 0.0;
    for (int i = 0; i < logits.rows(); ++i)
      denom += std::exp(static_cast<double>(col(i) - mx));
    const double log_denom = std::log(denom);
    const int y = labels[b];
    loss += log_denom - static_cast<double>(col(y) - mx);
    if (static_cast<int>(argmax) == y) ++correct;
    if (dlogits) {
      for (int i = 0; i < logits.rows(); ++i) {
        const double pi = std::exp(static_cast<double>(col(i) - mx)) / denom;
        (*dlogits)(i, b) =
            static_cast<Scalar>((pi - (i == y ? 1.0 : 0.0)) / B);
      }
    }
  }
  if (n_correct) *n_correct = correct;
  return loss / B;
}

template <class Scalar>
void softmax_inplace(Mat<Scalar>& logits) {
  for (int b = 0; b < logits.cols(); ++b) {
    auto col = logits.col(b);
    const Scalar mx = col.maxCoeff();
    col = (col.array() - mx).exp();
    col /= col.sum();
  }
}

}  // namespace amcbench
