#pragma once

#include "pdl/nn/layers.hpp"
#include "pdl/nn/normalizer.hpp"

#include <filesystem>
#include <span>

namespace pdl::nn {

struct LayerSpec {
  LayerKind kind;
  std::vector<int> config;
};

struct ModelSpec {
  std::vector<int> input_shape;   // per sample, e.g. {21} or {1, 64, 64}
  std::vector<LayerSpec> layers;  // ends with the split heads
  double l2 = 0.0;
  double learning_rate = 1e-3;
};

/// 21 -> normalize -> widths... -> 2 x head -> 2 x 1
ModelSpec metrics_mlp_spec(const std::vector<int>& widths = {64, 64}, int head = 32, int features = 21);
/// Periodic conv blocks (3x3 conv, ReLU, 2x2 pool) -> dense -> 2 x head -> 2 x 1
ModelSpec cnn_spec(int resolution = 64, const std::vector<int>& filters = {8, 16}, int dense = 128, int head = 64);

class Model {
 public:
  explicit Model(ModelSpec spec, std::uint64_t seed = 0);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }

  /// Throws a numeric error naming the layer when an activation turns non-finite.
  Tensor forward(const Tensor& x, bool training = false);
  Tensor backward(const Tensor& grad_out);
  std::vector<Param> params();
  void zero_grad();
  Eigen::Index parameter_count();
  Eigen::ArrayXd flat_parameters();
  void set_flat_parameters(const Eigen::ArrayXd& flat);
  std::vector<Eigen::ArrayXd*> buffers();

  /// First-layer input standardization, if the model has one.
  Normalize* input_normalization();

  NormalizerState targets;

 private:
  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// (1/n) sum_i |pred_i - target_i|^2 + lambda * sum xi^2
double loss_mse_l2(const Tensor& pred, const Tensor& target, std::span<const Param> params, double lambda);
/// Gradient of the data term with respect to pred.
Tensor mse_gradient(const Tensor& pred, const Tensor& target);
/// Adds 2 lambda xi to every parameter gradient.
void add_l2_gradient(std::span<const Param> params, double lambda);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;
};

void adam_step(std::span<const Param> params, AdamState& state, double learning_rate);

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(Model& model);
Model decode_checkpoint(std::string_view bytes);
void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace pdl::nn
