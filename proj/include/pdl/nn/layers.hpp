#pragma once

#include "pdl/nn/tensor.hpp"

#include <array>
#include <memory>
#include <string_view>

namespace pdl::nn {

enum class LayerKind : std::uint32_t { Dense = 1, Relu = 2, Conv = 3, MaxPool = 4, Flatten = 5, Normalize = 6, Heads = 7 };

struct Param {
  Eigen::ArrayXd* value;
  Eigen::ArrayXd* grad;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual Tensor forward(const Tensor& in, bool training) = 0;
  /// Accumulates parameter gradients and returns the input gradient.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Param> params() { return {}; }
  /// Every stored buffer, trainable or not, in checkpoint order.
  virtual std::vector<Eigen::ArrayXd*> buffers() { return {}; }
  virtual std::vector<int> output_shape(const std::vector<int>& in) const { return in; }
  /// Hyperparameters as stored in checkpoints.
  virtual std::vector<int> config() const { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Dense final : public Layer {
 public:
  Dense(int in, int out);
  LayerKind kind() const override { return LayerKind::Dense; }
  Tensor forward(const Tensor& in, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param> params() override { return {{&weight, &grad_weight}, {&bias, &grad_bias}}; }
  std::vector<Eigen::ArrayXd*> buffers() override { return {&weight, &bias}; }
  std::vector<int> output_shape(const std::vector<int>& in) const override { return {in[0], out_}; }
  std::vector<int> config() const override { return {in_, out_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  void init_he(Rng& rng);
  /// scalar output layers start at zero so the untrained net is a constant
  void init_zero();

  Eigen::ArrayXd weight;  // out x in, row-major
  Eigen::ArrayXd bias;
  Eigen::ArrayXd grad_weight;
  Eigen::ArrayXd grad_bias;

 private:
  int in_, out_;
  Tensor input_;
};

class Relu final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::Relu; }
  Tensor forward(const Tensor& in, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }

 private:
  Tensor input_;
};

/// Periodic-padding convolution, pad = kernel / 2.
class PeriodicConv2d final : public Layer {
 public:
  PeriodicConv2d(int in_channels, int out_channels, int kernel);
  LayerKind kind() const override { return LayerKind::Conv; }
  Tensor forward(const Tensor& in, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param> params() override { return {{&weight, &grad_weight}, {&bias, &grad_bias}}; }
  std::vector<Eigen::ArrayXd*> buffers() override { return {&weight, &bias}; }
  std::vector<int> output_shape(const std::vector<int>& in) const override;
  std::vector<int> config() const override { return {cin_, cout_, k_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<PeriodicConv2d>(*this); }
  void init_he(Rng& rng);

  Eigen::ArrayXd weight;  // [cout, cin, k, k]
  Eigen::ArrayXd bias;
  Eigen::ArrayXd grad_weight;
  Eigen::ArrayXd grad_bias;

 private:
  int cin_, cout_, k_;
  std::vector<int> in_shape_;
  std::vector<Eigen::MatrixXd> cols_;  // per sample, (cin k k) x (ho wo)
};

/// 2x2 max pool, stride 2; ties route the gradient to the first maximum.
class MaxPool2 final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::MaxPool; }
  Tensor forward(const Tensor& in, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int> output_shape(const std::vector<int>& in) const override { return {in[0], in[1], in[2] / 2, in[3] / 2}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(*this); }

 private:
  std::vector<int> in_shape_;
  std::vector<Eigen::Index> argmax_;
};

class Flatten final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::Flatten; }
  Tensor forward(const Tensor& in, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int> output_shape(const std::vector<int>& in) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  std::vector<int> in_shape_;
};

/// Fixed per-feature standardization fitted on training inputs.
class Normalize final : public Layer {
 public:
  explicit Normalize(int features);
  LayerKind kind() const override { return LayerKind::Normalize; }
  Tensor forward(const Tensor& in, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Eigen::ArrayXd*> buffers() override { return {&mean, &scale}; }
  std::vector<int> config() const override { return {static_cast<int>(mean.size())}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Normalize>(*this); }
  void fit(const Tensor& inputs);

  Eigen::ArrayXd mean;
  Eigen::ArrayXd scale;  // 1 / std, 1 for constant features
};

/// Two parallel branches Dense(width) -> ReLU -> Dense(1), outputs [N, 2].
class SplitHeads final : public Layer {
 public:
  SplitHeads(int in, int width);
  SplitHeads(const SplitHeads& other);
  LayerKind kind() const override { return LayerKind::Heads; }
  Tensor forward(const Tensor& in, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param> params() override;
  std::vector<Eigen::ArrayXd*> buffers() override;
  std::vector<int> output_shape(const std::vector<int>& in) const override { return {in[0], 2}; }
  std::vector<int> config() const override { return {in_, width_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<SplitHeads>(*this); }
  void init_he(Rng& rng);

 private:
  int in_, width_;
  std::array<Dense, 2> hidden_;
  std::array<Relu, 2> act_;
  std::array<Dense, 2> out_;
};

std::string_view to_string(LayerKind kind);

}  // namespace pdl::nn
