#include "amcbench/neuralnet.hpp"

#include <cmath>
#include <variant>

#include "amcbench/datastore.hpp"
#include "amcbench/nn_cores.hpp"

namespace amcbench {

namespace {
const char* kArchNames[3] = {"mlp", "cnn", "gru"};
constexpr uint32_t kModelVersion = 1;
constexpr char kModelMagic[4] = {'A', 'M', 'C', 'M'};
}  // namespace

std::string_view arch_name(Arch a) { return kArchNames[static_cast<int>(a)]; }

std::optional<Arch> arch_from_name(std::string_view name) {
  for (int i = 0; i < 3; ++i)
    if (name == kArchNames[i]) return static_cast<Arch>(i);
  return std::nullopt;
}

double ModelConfig::effective_scale() const {
  return input_scale > 0.0 ? input_scale
                           : std::sqrt(static_cast<double>(n_subcarriers));
}

void ModelConfig::validate() const {
  if (n_classes < 2) throw std::invalid_argument("need at least two classes");
  if (symbols_per_frame == 0 || n_subcarriers == 0)
    throw std::invalid_argument("input shape must be nonzero");
  for (uint32_t h : mlp_hidden)
    if (h == 0) throw std::invalid_argument("hidden width must be positive");
  if (arch == Arch::CNN &&
      (cnn_filters1 == 0 || cnn_filters2 == 0 || cnn_dense == 0))
    throw std::invalid_argument("cnn widths must be positive");
  if (arch == Arch::GRU && gru_hidden == 0)
    throw std::invalid_argument("gru width must be positive");
}

using CoreVariant = std::variant<MlpCore<float>, CnnCore<float>, GruCore<float>>;

static CoreVariant make_core(const ModelConfig& cfg) {
  switch (cfg.arch) {
    case Arch::MLP: {
      MlpCore<float> c;
      c.in_dim = static_cast<int>(cfg.input_dim());
      for (uint32_t h : cfg.mlp_hidden) c.hidden.push_back(static_cast<int>(h));
      c.n_classes = static_cast<int>(cfg.n_classes);
      return c;
    }
    case Arch::CNN: {
      CnnCore<float> c;
      c.n = static_cast<int>(cfg.n_subcarriers);
      c.m = static_cast<int>(cfg.symbols_per_frame);
      c.n_classes = static_cast<int>(cfg.n_classes);
      c.f1 = static_cast<int>(cfg.cnn_filters1);
      c.k1 = static_cast<int>(cfg.cnn_kernel1);
      c.f2 = static_cast<int>(cfg.cnn_filters2);
      c.k2 = static_cast<int>(cfg.cnn_kernel2);
      c.dense = static_cast<int>(cfg.cnn_dense);
      c.check_dims();
      return c;
    }
    case Arch::GRU: {
      GruCore<float> c;
      c.n_steps = static_cast<int>(cfg.n_subcarriers);
      c.in_dim = static_cast<int>(2 * cfg.symbols_per_frame);
      c.hidden = static_cast<int>(cfg.gru_hidden);
      c.n_classes = static_cast<int>(cfg.n_classes);
      return c;
    }
  }
  throw std::invalid_argument("unknown architecture");
}

struct Model::Impl {
  ModelConfig cfg;
  CoreVariant core;
  std::vector<float> params;
  std::vector<EpochStats> history;

  explicit Impl(const ModelConfig& c) : cfg(c), core(make_core(c)) {
    cfg.validate();
    params.assign(std::visit([](const auto& k) { return k.n_params(); }, core),
                  0.0f);
  }

  Mat<float> to_batch(const std::vector<const float*>& xs) const {
    const size_t d = cfg.input_dim();
    const float scale = static_cast<float>(cfg.effective_scale());
    Mat<float> x(d, xs.size());
    for (size_t b = 0; b < xs.size(); ++b)
      for (size_t i = 0; i < d; ++i) x(i, b) = xs[b][i] * scale;
    return x;
  }

  void forward_logits(const Mat<float>& x, Mat<float>& logits) const {
    std::visit([&](const auto& k) { k.forward(params.data(), x, logits, nullptr); },
               core);
  }
};

Model::Model(const ModelConfig& cfg) : impl_(std::make_unique<Impl>(cfg)) {}
Model::Model(const Model& other) : impl_(std::make_unique<Impl>(*other.impl_)) {}
Model& Model::operator=(const Model& other) {
  impl_ = std::make_unique<Impl>(*other.impl_);
  return *this;
}
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;
Model::~Model() = default;

void Model::init_params(uint64_t seed) {
  Rng rng(derive_seed(seed, "init", static_cast<uint64_t>(impl_->cfg.arch)));
  std::visit([&](const auto& k) { k.init(impl_->params.data(), rng); },
             impl_->core);
}

const ModelConfig& Model::config() const { return impl_->cfg; }
std::vector<float>& Model::params() { return impl_->params; }
const std::vector<float>& Model::params() const { return impl_->params; }

size_t Model::output_layer_offset() const {
  return std::visit([](const auto& k) { return k.output_offset(); }, impl_->core);
}

size_t Model::penultimate_width() const {
  return std::visit(
      [](const auto& k) { return static_cast<size_t>(k.penultimate_width()); },
      impl_->core);
}

std::vector<EpochStats>& Model::history() { return impl_->history; }
const std::vector<EpochStats>& Model::history() const { return impl_->history; }

std::vector<double> Model::logits_of(const std::vector<float>& x) const {
  if (x.size() != impl_->cfg.input_dim())
    throw std::invalid_argument("input tensor size mismatch");
  Mat<float> batch = impl_->to_batch({x.data()});
  Mat<float> logits;
  impl_->forward_logits(batch, logits);
  std::vector<double> out(logits.rows());
  for (int i = 0; i < logits.rows(); ++i) out[i] = logits(i, 0);
  return out;
}

std::vector<double> Model::forward(const std::vector<float>& x) const {
  auto z = logits_of(x);
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double denom = 0.0;
  for (double v : z) denom += std::exp(v - mx);
  std::vector<double> p(z.size());
  for (size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - mx) / denom;
  return p;
}

std::vector<std::vector<double>> Model::forward_batch(
    const std::vector<const float*>& xs) const {
  std::vector<std::vector<double>> out;
  out.reserve(xs.size());
  constexpr size_t kChunk = 256;
  for (size_t start = 0; start < xs.size(); start += kChunk) {
    const size_t stop = std::min(xs.size(), start + kChunk);
    std::vector<const float*> view(xs.begin() + start, xs.begin() + stop);
    Mat<float> batch = impl_->to_batch(view);
    Mat<float> logits;
    impl_->forward_logits(batch, logits);
    for (int b = 0; b < logits.cols(); ++b) {
      auto col = logits.col(b);
      const float mx = col.maxCoeff();
      double denom = 0.0;
      for (int i = 0; i < logits.rows(); ++i)
        denom += std::exp(static_cast<double>(col(i) - mx));
      std::vector<double> p(logits.rows());
      for (int i = 0; i < logits.rows(); ++i)
        p[i] = std::exp(static_cast<double>(col(i) - mx)) / denom;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<uint16_t> Model::predict(const std::vector<const float*>& xs) const {
  std::vector<uint16_t> out;
  out.reserve(xs.size());
  constexpr size_t kChunk = 256;
  for (size_t start = 0; start < xs.size(); start += kChunk) {
    const size_t stop = std::min(xs.size(), start + kChunk);
    std::vector<const float*> view(xs.begin() + start, xs.begin() + stop);
    Mat<float> batch = impl_->to_batch(view);
    Mat<float> logits;
    impl_->forward_logits(batch, logits);
    for (int b = 0; b < logits.cols(); ++b) {
      Eigen::Index arg;
      logits.col(b).maxCoeff(&arg);
      out.push_back(static_cast<uint16_t>(arg));
    }
  }
  return out;
}

std::vector<float> Model::penultimate(const std::vector<float>& x) const {
  if (x.size() != impl_->cfg.input_dim())
    throw std::invalid_argument("input tensor size mismatch");
  Mat<float> batch = impl_->to_batch({x.data()});
  Mat<float> h;
  std::visit([&](const auto& k) { k.penultimate(impl_->params.data(), batch, h); },
             impl_->core);
  std::vector<float> out(h.rows());
  for (int i = 0; i < h.rows(); ++i) out[i] = h(i, 0);
  return out;
}

namespace {

// Shared backward driver: dlogits -> input gradient (pre-scale applied).
std::vector<float> input_grad_from_dlogits(const Model::Impl& impl,
                                           const Mat<float>& x,
                                           const Mat<float>& dlogits) {
  Mat<float> dx;
  std::vector<float> scratch(impl.params.size(), 0.0f);
  std::visit(
      [&](const auto& k) {
        typename std::decay_t<decltype(k)>::Cache cache;
        Mat<float> logits;
        k.forward(impl.params.data(), x, logits, &cache);
        k.backward(impl.params.data(), cache, dlogits, scratch.data(), &dx);
      },
      impl.core);
  const float scale = static_cast<float>(impl.cfg.effective_scale());
  std::vector<float> out(dx.rows());
  for (int i = 0; i < dx.rows(); ++i) out[i] = dx(i, 0) * scale;
  return out;
}

}  // namespace

std::vector<float> Model::input_gradient(const std::vector<float>& x,
                                         uint32_t target_class) const {
  if (x.size() != impl_->cfg.input_dim())
    throw std::invalid_argument("input tensor size mismatch");
  if (target_class >= impl_->cfg.n_classes)
    throw std::invalid_argument("target class out of range");
  Mat<float> batch = impl_->to_batch({x.data()});
  Mat<float> dlogits = Mat<float>::Zero(impl_->cfg.n_classes, 1);
  dlogits(target_class, 0) = 1.0f;
  return input_grad_from_dlogits(*impl_, batch, dlogits);
}

std::vector<float> Model::input_gradient_ce(const std::vector<float>& x,
                                            uint32_t target_class) const {
  if (x.size() != impl_->cfg.input_dim())
    throw std::invalid_argument("input tensor size mismatch");
  Mat<float> batch = impl_->to_batch({x.data()});
  Mat<float> logits;
  impl_->forward_logits(batch, logits);
  Mat<float> dlogits;
  softmax_ce(logits, {static_cast<uint16_t>(target_class)}, &dlogits);
  return input_grad_from_dlogits(*impl_, batch, dlogits);
}

double Model::input_gradient_ce_batch(const std::vector<const float*>& xs,
                                      uint32_t target_class,
                                      std::vector<float>& dx_mean) const {
  Mat<float> batch = impl_->to_batch(xs);
  double loss = 0.0;
  Mat<float> dx;
  std::vector<float> scratch(impl_->params.size(), 0.0f);
  std::vector<uint16_t> labels(xs.size(), static_cast<uint16_t>(target_class));
  std::visit(
      [&](const auto& k) {
        typename std::decay_t<decltype(k)>::Cache cache;
        Mat<float> logits;
        k.forward(impl_->params.data(), batch, logits, &cache);
        Mat<float> dlogits;
        loss = softmax_ce(logits, labels, &dlogits);
        k.backward(impl_->params.data(), cache, dlogits, scratch.data(), &dx);
      },
      impl_->core);
  const float scale = static_cast<float>(impl_->cfg.effective_scale());
  dx_mean.assign(impl_->cfg.input_dim(), 0.0f);
  for (int b = 0; b < dx.cols(); ++b)
    for (size_t i = 0; i < dx_mean.size(); ++i)
      dx_mean[i] += dx(static_cast<int>(i), b);
  for (auto& v : dx_mean) v *= scale;  // dlogits already carry the 1/B
  return loss;
}

double Model::input_gradients_ce(const std::vector<const float*>& xs,
                                 uint32_t target_class,
                                 std::vector<std::vector<float>>& dxs,
                                 std::vector<uint16_t>* preds) const {
  Mat<float> batch = impl_->to_batch(xs);
  double loss = 0.0;
  Mat<float> dx;
  std::vector<float> scratch(impl_->params.size(), 0.0f);
  std::vector<uint16_t> labels(xs.size(), static_cast<uint16_t>(target_class));
  Mat<float> logits;
  std::visit(
      [&](const auto& k) {
        typename std::decay_t<decltype(k)>::Cache cache;
        k.forward(impl_->params.data(), batch, logits, &cache);
        Mat<float> dlogits;
        loss = softmax_ce(logits, labels, &dlogits);
        k.backward(impl_->params.data(), cache, dlogits, scratch.data(), &dx);
      },
      impl_->core);
  // undo the 1/B that softmax_ce folds into dlogits
  const float scale = static_cast<float>(impl_->cfg.effective_scale() *
                                         static_cast<double>(xs.size()));
  dxs.assign(xs.size(), std::vector<float>(impl_->cfg.input_dim()));
  for (int b = 0; b < dx.cols(); ++b)
    for (int i = 0; i < dx.rows(); ++i)
      dxs[b][static_cast<size_t>(i)] = dx(i, b) * scale;
  if (preds) {
    preds->resize(xs.size());
    for (int b = 0; b < logits.cols(); ++b) {
      Eigen::Index arg;
      logits.col(b).maxCoeff(&arg);
      (*preds)[b] = static_cast<uint16_t>(arg);
    }
  }
  return loss;
}

// --- training ---------------------------------------------------------------

void train(Model& model, const std::vector<const float*>& xs,
           const std::vector<uint16_t>& ys, const TrainConfig& cfg) {
  if (xs.empty() || xs.size() != ys.size())
    throw std::invalid_argument("empty or misaligned training set");
  for (uint16_t y : ys)
    if (y >= model.config().n_classes)
      throw std::invalid_argument("label out of range");

  auto& impl = model.impl();
  const size_t n_params = impl.params.size();
  std::vector<float> grad(n_params, 0.0f);
  std::vector<float> m_adam, v_adam;
  if (cfg.optimizer == TrainConfig::Opt::Adam) {
    m_adam.assign(n_params, 0.0f);
    v_adam.assign(n_params, 0.0f);
  }

  std::vector<uint32_t> order(xs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);

  uint64_t step = 0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch", epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    size_t correct = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<const float*> bx;
      std::vector<uint16_t> by;
      bx.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) {
        bx.push_back(xs[order[i]]);
        by.push_back(ys[order[i]]);
      }
      Mat<float> batch = impl.to_batch(bx);
      std::fill(grad.begin(), grad.end(), 0.0f);
      double loss = 0.0;
      int ncorr = 0;
      std::visit(
          [&](const auto& k) {
            typename std::decay_t<decltype(k)>::Cache cache;
            Mat<float> logits, dlogits;
            k.forward(impl.params.data(), batch, logits, &cache);
            loss = softmax_ce(logits, by, &dlogits, &ncorr);
            k.backward(impl.params.data(), cache, dlogits, grad.data(), nullptr);
          },
          impl.core);
      epoch_loss += loss * static_cast<double>(bx.size());
      correct += static_cast<size_t>(ncorr);

      ++step;
      if (cfg.optimizer == TrainConfig::Opt::Adam) {
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
        for (size_t i = 0; i < n_params; ++i) {
          const double g = grad[i];
          m_adam[i] = static_cast<float>(b1 * m_adam[i] + (1 - b1) * g);
          v_adam[i] = static_cast<float>(b2 * v_adam[i] + (1 - b2) * g * g);
          const double mhat = m_adam[i] / bc1;
          const double vhat = v_adam[i] / bc2;
          impl.params[i] -= static_cast<float>(cfg.learning_rate * mhat /
                                               (std::sqrt(vhat) + eps));
        }
      } else {
        for (size_t i = 0; i < n_params; ++i)
          impl.params[i] -= static_cast<float>(cfg.learning_rate * grad[i]);
      }
    }
    epoch_loss /= static_cast<double>(xs.size());
    if (!std::isfinite(epoch_loss))
      throw TrainingDiverged(static_cast<int>(epoch));
    impl.history.push_back(
        {epoch_loss, static_cast<double>(correct) / xs.size()});
  }
}

// --- checkpoints -------------------------------------------------------------

void save_model(const Model& model, const std::string& path) {
  const ModelConfig& c = model.config();
  ByteWriter w;
  w.put_bytes(kModelMagic, 4);
  w.put_u32(kModelVersion);
  w.put_u8(static_cast<uint8_t>(c.arch));
  w.put_u32(c.symbols_per_frame);
  w.put_u32(c.n_subcarriers);
  w.put_u32(c.n_classes);
  w.put_u32(static_cast<uint32_t>(c.mlp_hidden.size()));
  for (uint32_t h : c.mlp_hidden) w.put_u32(h);
  w.put_u32(c.cnn_filters1);
  w.put_u32(c.cnn_kernel1);
  w.put_u32(c.cnn_filters2);
  w.put_u32(c.cnn_kernel2);
  w.put_u32(c.cnn_dense);
  w.put_u32(c.gru_hidden);
  w.put_f32(static_cast<float>(c.input_scale));
  w.put_u32(static_cast<uint32_t>(model.history().size()));
  for (const auto& h : model.history()) {
    w.put_f32(static_cast<float>(h.loss));
    w.put_f32(static_cast<float>(h.accuracy));
  }
  w.put_u64(model.params().size());
  for (float p : model.params()) w.put_f32(p);

  std::string bytes = w.bytes();
  ByteWriter tail;
  tail.put_u64(fnv1a(bytes.data(), bytes.size()));
  bytes += tail.bytes();
  write_file_bytes(path, bytes);
}

Model load_model(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  ByteReader r(bytes.data(), bytes.size());
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0)
    throw FormatError("bad model magic");
  const uint32_t version = r.get_u32();
  if (version != kModelVersion)
    throw VersionMismatchError("model format version " + std::to_string(version) +
                               ", expected " + std::to_string(kModelVersion));
  if (bytes.size() < 8) throw TruncatedFileError("model file has no checksum");
  const uint64_t stored = ByteReader(bytes.data() + bytes.size() - 8, 8).get_u64();
  if (stored != fnv1a(bytes.data(), bytes.size() - 8))
    throw ChecksumError("model checksum mismatch");

  ModelConfig c;
  c.arch = static_cast<Arch>(r.get_u8());
  c.symbols_per_frame = r.get_u32();
  c.n_subcarriers = r.get_u32();
  c.n_classes = r.get_u32();
  c.mlp_hidden.resize(r.get_u32());
  for (auto& h : c.mlp_hidden) h = r.get_u32();
  c.cnn_filters1 = r.get_u32();
  c.cnn_kernel1 = r.get_u32();
  c.cnn_filters2 = r.get_u32();
  c.cnn_kernel2 = r.get_u32();
  c.cnn_dense = r.get_u32();
  c.gru_hidden = r.get_u32();
  c.input_scale = r.get_f32();

  Model model(c);
  model.history().resize(r.get_u32());
  for (auto& h : model.history()) {
    h.loss = r.get_f32();
    h.accuracy = r.get_f32();
  }
  const uint64_t n_params = r.get_u64();
  if (n_params != model.params().size())
    throw FormatError("parameter count disagrees with architecture");
  for (auto& p : model.params()) p = r.get_f32();
  if (r.remaining() != 8) throw FormatError("trailing bytes in model file");
  return model;
}

}  // namespace amcbench
