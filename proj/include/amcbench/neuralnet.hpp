#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "amcbench/common.hpp"

namespace amcbench {

enum class Arch : uint8_t { MLP = 0, CNN, GRU };

std::string_view arch_name(Arch a);
std::optional<Arch> arch_from_name(std::string_view name);

struct ModelConfig {
  Arch arch = Arch::CNN;
  uint32_t symbols_per_frame = 4;  // M
  uint32_t n_subcarriers = 128;    // N (model input is M x N x 2)
  uint32_t n_classes = 6;

  std::vector<uint32_t> mlp_hidden{128, 128};
  uint32_t cnn_filters1 = 8, cnn_kernel1 = 8;
  uint32_t cnn_filters2 = 16, cnn_kernel2 = 5;
  uint32_t cnn_dense = 64;
  uint32_t gru_hidden = 64;

  // Received tensors carry per-sample power ~1/N; inputs are pre-scaled by
  // this factor so activations start O(1). 0 selects sqrt(N).
  double input_scale = 0.0;

  double effective_scale() const;
  size_t input_dim() const { return size_t(symbols_per_frame) * n_subcarriers * 2; }
  void validate() const;
};

struct TrainConfig {
  uint32_t epochs = 12;
  uint32_t batch_size = 64;
  double learning_rate = 1e-3;
  enum class Opt : uint8_t { SGD = 0, Adam } optimizer = Opt::Adam;
  uint64_t seed = 1;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;  // fraction in [0,1]
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  ~Model();

  void init_params(uint64_t seed);

  const ModelConfig& config() const;
  std::vector<float>& params();
  const std::vector<float>& params() const;
  size_t output_layer_offset() const;  // first index of the final dense block
  size_t penultimate_width() const;
  std::vector<EpochStats>& history();
  const std::vector<EpochStats>& history() const;

  // Single-example softmax probabilities / raw logits.
  std::vector<double> forward(const std::vector<float>& x) const;
  std::vector<double> logits_of(const std::vector<float>& x) const;
  // Batched probabilities, one row per example.
  std::vector<std::vector<double>> forward_batch(
      const std::vector<const float*>& xs) const;
  std::vector<uint16_t> predict(const std::vector<const float*>& xs) const;

  std::vector<float> penultimate(const std::vector<float>& x) const;

  // d logit_target / d input, shaped like the input tensor.
  std::vector<float> input_gradient(const std::vector<float>& x,
                                    uint32_t target_class) const;
  // d CE(f(x), target) / d input; drives the trigger reverse-engineering.
  std::vector<float> input_gradient_ce(const std::vector<float>& x,
                                       uint32_t target_class) const;
  // Batched CE input gradient with a shared target class; returns mean loss.
  double input_gradient_ce_batch(const std::vector<const float*>& xs,
                                 uint32_t target_class,
                                 std::vector<float>& dx_mean) const;
  // Same pass, but keeps the per-example gradients (and optionally each
  // example's argmax) instead of collapsing to the mean.
  double input_gradients_ce(const std::vector<const float*>& xs,
                            uint32_t target_class,
                            std::vector<std::vector<float>>& dxs,
                            std::vector<uint16_t>* preds = nullptr) const;

  struct Impl;
  Impl& impl() { return *impl_; }
  const Impl& impl() const { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

// Minibatch training over borrowed example views. Deterministic under
// cfg.seed; throws TrainingDiverged on NaN epoch loss. Appends to the
// model's history.
void train(Model& model, const std::vector<const float*>& xs,
           const std::vector<uint16_t>& ys, const TrainConfig& cfg);

// Checkpoints: magic "AMCM", flat f32 parameters, training history,
// trailing checksum. Same failure taxonomy as the dataset container.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace amcbench
