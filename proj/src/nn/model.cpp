#include "pdl/nn/model.hpp"

#include <cmath>

namespace pdl::nn {

ModelSpec metrics_mlp_spec(const std::vector<int>& widths, int head, int features) {
  ModelSpec s;
  s.input_shape = {features};
  s.learning_rate = 2e-4;
  s.layers.push_back({LayerKind::Normalize, {features}});
  int in = features;
  for (int w : widths) {
    s.layers.push_back({LayerKind::Dense, {in, w}});
    s.layers.push_back({LayerKind::Relu, {}});
    in = w;
  }
  s.layers.push_back({LayerKind::Heads, {in, head}});
  return s;
}

ModelSpec cnn_spec(int resolution, const std::vector<int>& filters, int dense, int head) {
  ModelSpec s;
  s.input_shape = {1, resolution, resolution};
  s.learning_rate = 1e-3;
  int c = 1, r = resolution;
  for (int f : filters) {
    s.layers.push_back({LayerKind::Conv, {c, f, 3}});
    s.layers.push_back({LayerKind::Relu, {}});
    s.layers.push_back({LayerKind::MaxPool, {}});
    c = f;
    r /= 2;
  }
  s.layers.push_back({LayerKind::Flatten, {}});
  s.layers.push_back({LayerKind::Dense, {c * r * r, dense}});
  s.layers.push_back({LayerKind::Relu, {}});
  s.layers.push_back({LayerKind::Heads, {dense, head}});
  return s;
}

namespace {

std::unique_ptr<Layer> make_layer(const LayerSpec& ls) {
  auto need = [&](std::size_t n) {
    if (ls.config.size() != n) throw Error(ErrorCode::InvalidArgument, std::string("bad config for ") + std::string(to_string(ls.kind)) + " layer");
  };
  switch (ls.kind) {
    case LayerKind::Dense: need(2); return std::make_unique<Dense>(ls.config[0], ls.config[1]);
    case LayerKind::Relu: need(0); return std::make_unique<Relu>();
    case LayerKind::Conv: need(3); return std::make_unique<PeriodicConv2d>(ls.config[0], ls.config[1], ls.config[2]);
    case LayerKind::MaxPool: need(0); return std::make_unique<MaxPool2>();
    case LayerKind::Flatten: need(0); return std::make_unique<Flatten>();
    case LayerKind::Normalize: need(1); return std::make_unique<Normalize>(ls.config[0]);
    case LayerKind::Heads: need(2); return std::make_unique<SplitHeads>(ls.config[0], ls.config[1]);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown layer kind");
}

}  // namespace

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.layers.empty() || spec_.layers.back().kind != LayerKind::Heads)
    throw Error(ErrorCode::InvalidArgument, "model must end with split heads");
  Rng rng(seed);
  std::vector<int> shape{1};
  shape.insert(shape.end(), spec_.input_shape.begin(), spec_.input_shape.end());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& ls = spec_.layers[i];
    auto layer = make_layer(ls);
    const auto fail = [&] {
      throw Error(ErrorCode::InvalidArgument, "layer " + std::to_string(i) + " (" + std::string(to_string(ls.kind)) + ") does not fit its input");
    };
    switch (ls.kind) {
      case LayerKind::Dense:
      case LayerKind::Heads:
      case LayerKind::Normalize:
        if (shape.size() != 2 || shape[1] != ls.config[0]) fail();
        break;
      case LayerKind::Conv:
        if (shape.size() != 4 || shape[1] != ls.config[0] || shape[2] < ls.config[2] || shape[3] < ls.config[2]) fail();
        break;
      case LayerKind::MaxPool:
        if (shape.size() != 4 || shape[2] < 2 || shape[3] < 2) fail();
        break;
      default:
        break;
    }
    if (auto* d = dynamic_cast<Dense*>(layer.get())) d->init_he(rng);
    if (auto* c = dynamic_cast<PeriodicConv2d*>(layer.get())) c->init_he(rng);
    if (auto* h = dynamic_cast<SplitHeads*>(layer.get())) h->init_he(rng);
    shape = layer->output_shape(shape);
    layers_.push_back(std::move(layer));
  }
}

Model::Model(const Model& other) : targets(other.targets), spec_(other.spec_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Tensor Model::forward(const Tensor& x, bool training) {
  std::vector<int> expect{x.batch()};
  expect.insert(expect.end(), spec_.input_shape.begin(), spec_.input_shape.end());
  if (x.shape != expect) throw Error(ErrorCode::InvalidArgument, "model input shape mismatch");
  Tensor a = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    a = layers_[i]->forward(a, training);
    if (!a.values.allFinite()) throw Error(ErrorCode::Numeric, "non-finite activation after layer " + std::to_string(i));
  }
  return a;
}

Tensor Model::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g);
    if (!g.values.allFinite()) throw Error(ErrorCode::Numeric, "non-finite gradient at layer " + std::to_string(i));
  }
  return g;
}

std::vector<Param> Model::params() {
  std::vector<Param> p;
  for (auto& l : layers_)
    for (auto q : l->params()) p.push_back(q);
  return p;
}

std::vector<Eigen::ArrayXd*> Model::buffers() {
  std::vector<Eigen::ArrayXd*> b;
  for (auto& l : layers_)
    for (auto q : l->buffers()) b.push_back(q);
  return b;
}

void Model::zero_grad() {
  for (auto& p : params()) p.grad->setZero();
}

Eigen::Index Model::parameter_count() {
  Eigen::Index n = 0;
  for (auto& p : params()) n += p.value->size();
  return n;
}

Eigen::ArrayXd Model::flat_parameters() {
  Eigen::ArrayXd flat(parameter_count());
  Eigen::Index o = 0;
  for (auto& p : params()) {
    flat.segment(o, p.value->size()) = *p.value;
    o += p.value->size();
  }
  return flat;
}

void Model::set_flat_parameters(const Eigen::ArrayXd& flat) {
  if (flat.size() != parameter_count()) throw Error(ErrorCode::InvalidArgument, "parameter vector size mismatch");
  Eigen::Index o = 0;
  for (auto& p : params()) {
    *p.value = flat.segment(o, p.value->size());
    o += p.value->size();
  }
}

Normalize* Model::input_normalization() {
  return layers_.empty() ? nullptr : dynamic_cast<Normalize*>(layers_.front().get());
}

double loss_mse_l2(const Tensor& pred, const Tensor& target, std::span<const Param> params, double lambda) {
  if (pred.shape != target.shape || pred.batch() < 1) throw Error(ErrorCode::InvalidArgument, "loss shape mismatch");
  double loss = (pred.values - target.values).square().sum() / pred.batch();
  if (lambda != 0.0)
    for (const auto& p : params) loss += lambda * p.value->square().sum();
  return loss;
}

Tensor mse_gradient(const Tensor& pred, const Tensor& target) {
  Tensor g = pred;
  g.values = 2.0 * (pred.values - target.values) / pred.batch();
  return g;
}

void add_l2_gradient(std::span<const Param> params, double lambda) {
  if (lambda == 0.0) return;
  for (const auto& p : params) *p.grad += 2.0 * lambda * *p.value;
}

void adam_step(std::span<const Param> params, AdamState& s, double learning_rate) {
  if (s.m.size() != params.size()) {
    s.m.clear();
    s.v.clear();
    for (const auto& p : params) {
      s.m.push_back(Eigen::ArrayXd::Zero(p.value->size()));
      s.v.push_back(Eigen::ArrayXd::Zero(p.value->size()));
    }
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::ArrayXd& g = *params[i].grad;
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g.square();
    *params[i].value -= learning_rate * (s.m[i] / c1) / ((s.v[i] / c2).sqrt() + s.eps);
  }
}

}  // namespace pdl::nn
