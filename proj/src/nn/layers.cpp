#include "pdl/nn/layers.hpp"

#include <cmath>

namespace pdl::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void he_uniform(Eigen::ArrayXd& w, int fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / fan_in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = (2.0 * rng.uniform() - 1.0) * limit;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Normalize: return "normalize";
    case LayerKind::Heads: return "heads";
  }
  return "?";
}

// --- Dense

Dense::Dense(int in, int out) : in_(in), out_(out) {
  if (in < 1 || out < 1) throw Error(ErrorCode::InvalidArgument, "dense layer needs positive sizes");
  weight = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(in) * out);
  bias = Eigen::ArrayXd::Zero(out);
  grad_weight = weight;
  grad_bias = bias;
}

void Dense::init_he(Rng& rng) {
  he_uniform(weight, in_, rng);
  bias.setZero();
}

void Dense::init_zero() {
  weight.setZero();
  bias.setZero();
}

Tensor Dense::forward(const Tensor& in, bool training) {
  if (in.stride() != in_) throw Error(ErrorCode::InvalidArgument, "dense input width mismatch");
  if (training) input_ = in;
  Eigen::Map<const RowMatrix> w(weight.data(), out_, in_);
  Tensor out({in.batch(), out_});
  out.rows() = (in.rows() * w.transpose()).rowwise() + bias.matrix().transpose();
  return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
  Eigen::Map<const RowMatrix> w(weight.data(), out_, in_);
  Eigen::Map<RowMatrix> gw(grad_weight.data(), out_, in_);
  gw += grad_out.rows().transpose() * input_.rows();
  grad_bias += grad_out.rows().colwise().sum().transpose().array();
  Tensor gin(input_.shape);
  gin.rows() = grad_out.rows() * w;
  return gin;
}

// --- ReLU

Tensor Relu::forward(const Tensor& in, bool training) {
  if (training) input_ = in;
  Tensor out = in;
  out.values = in.values.max(0.0);
  return out;
}

Tensor Relu::backward(const Tensor& grad_out) {
  Tensor gin = grad_out;
  gin.values = (input_.values > 0.0).select(grad_out.values, 0.0);
  return gin;
}

// --- Periodic convolution

PeriodicConv2d::PeriodicConv2d(int in_channels, int out_channels, int kernel)
    : cin_(in_channels), cout_(out_channels), k_(kernel) {
  if (cin_ < 1 || cout_ < 1 || k_ < 1) throw Error(ErrorCode::InvalidArgument, "conv layer needs positive sizes");
  weight = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(cout_) * cin_ * k_ * k_);
  bias = Eigen::ArrayXd::Zero(cout_);
  grad_weight = weight;
  grad_bias = bias;
}

void PeriodicConv2d::init_he(Rng& rng) {
  he_uniform(weight, cin_ * k_ * k_, rng);
  bias.setZero();
}

std::vector<int> PeriodicConv2d::output_shape(const std::vector<int>& in) const {
  const int pad = k_ / 2;
  return {in[0], cout_, in[2] + 2 * pad - k_ + 1, in[3] + 2 * pad - k_ + 1};
}

Tensor PeriodicConv2d::forward(const Tensor& in, bool training) {
  if (in.shape.size() != 4 || in.dim(1) != cin_) throw Error(ErrorCode::InvalidArgument, "conv input channel mismatch");
  const int n = in.dim(0), h = in.dim(2), w = in.dim(3), pad = k_ / 2;
  if (h < k_ || w < k_) throw Error(ErrorCode::InvalidArgument, "conv input smaller than kernel");
  const std::vector<int> os = output_shape(in.shape);
  const int ho = os[2], wo = os[3];
  Eigen::Map<const RowMatrix> wm(weight.data(), cout_, static_cast<Eigen::Index>(cin_) * k_ * k_);
  Tensor out(os);
  if (training) {
    in_shape_ = in.shape;
    cols_.resize(n);
  }
  Eigen::MatrixXd col(static_cast<Eigen::Index>(cin_) * k_ * k_, static_cast<Eigen::Index>(ho) * wo);
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < cin_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const Eigen::Index r = (static_cast<Eigen::Index>(c) * k_ + ky) * k_ + kx;
          for (int y = 0; y < ho; ++y) {
            const int sy = wrap_index(y + ky - pad, h);
            for (int x = 0; x < wo; ++x) col(r, static_cast<Eigen::Index>(y) * wo + x) = in.at(b, c, sy, wrap_index(x + kx - pad, w));
          }
        }
    Eigen::Map<RowMatrix> ob(out.values.data() + static_cast<Eigen::Index>(b) * cout_ * ho * wo, cout_,
                             static_cast<Eigen::Index>(ho) * wo);
    ob.noalias() = wm * col;
    ob.colwise() += bias.matrix();
    if (training) cols_[b] = col;
  }
  return out;
}

Tensor PeriodicConv2d::backward(const Tensor& grad_out) {
  const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3], pad = k_ / 2;
  const int ho = grad_out.dim(2), wo = grad_out.dim(3);
  Eigen::Map<const RowMatrix> wm(weight.data(), cout_, static_cast<Eigen::Index>(cin_) * k_ * k_);
  Eigen::Map<RowMatrix> gw(grad_weight.data(), cout_, static_cast<Eigen::Index>(cin_) * k_ * k_);
  Tensor gin(in_shape_);
  for (int b = 0; b < n; ++b) {
    Eigen::Map<const RowMatrix> gb(grad_out.values.data() + static_cast<Eigen::Index>(b) * cout_ * ho * wo, cout_,
                                   static_cast<Eigen::Index>(ho) * wo);
    gw.noalias() += gb * cols_[b].transpose();
    grad_bias += gb.rowwise().sum().array();
    const Eigen::MatrixXd dcol = wm.transpose() * gb;
    for (int c = 0; c < cin_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const Eigen::Index r = (static_cast<Eigen::Index>(c) * k_ + ky) * k_ + kx;
          for (int y = 0; y < ho; ++y) {
            const int sy = wrap_index(y + ky - pad, h);
            for (int x = 0; x < wo; ++x) gin.at(b, c, sy, wrap_index(x + kx - pad, w)) += dcol(r, static_cast<Eigen::Index>(y) * wo + x);
          }
        }
  }
  return gin;
}

// --- Max pool

Tensor MaxPool2::forward(const Tensor& in, bool training) {
  if (in.shape.size() != 4 || in.dim(2) < 2 || in.dim(3) < 2) throw Error(ErrorCode::InvalidArgument, "max pool needs [N,C,H>=2,W>=2]");
  const std::vector<int> os = output_shape(in.shape);
  Tensor out(os);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(out.size()));
  const int h = in.dim(2), w = in.dim(3);
  Eigen::Index o = 0;
  for (int b = 0; b < os[0]; ++b)
    for (int c = 0; c < os[1]; ++c)
      for (int y = 0; y < os[2]; ++y)
        for (int x = 0; x < os[3]; ++x, ++o) {
          const Eigen::Index base = (static_cast<Eigen::Index>(b) * os[1] + c) * h * w;
          Eigen::Index best = base + static_cast<Eigen::Index>(2 * y) * w + 2 * x;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const Eigen::Index i = base + static_cast<Eigen::Index>(2 * y + dy) * w + 2 * x + dx;
              if (in.values[i] > in.values[best]) best = i;
            }
          out.values[o] = in.values[best];
          arg[static_cast<std::size_t>(o)] = best;
        }
  if (training) {
    in_shape_ = in.shape;
    argmax_ = std::move(arg);
  }
  return out;
}

Tensor MaxPool2::backward(const Tensor& grad_out) {
  Tensor gin(in_shape_);
  for (Eigen::Index o = 0; o < grad_out.size(); ++o) gin.values[argmax_[static_cast<std::size_t>(o)]] += grad_out.values[o];
  return gin;
}

// --- Flatten

std::vector<int> Flatten::output_shape(const std::vector<int>& in) const {
  return {in[0], static_cast<int>(Tensor::count(in) / in[0])};
}

Tensor Flatten::forward(const Tensor& in, bool training) {
  if (training) in_shape_ = in.shape;
  return in.reshaped(output_shape(in.shape));
}

Tensor Flatten::backward(const Tensor& grad_out) { return grad_out.reshaped(in_shape_); }

// --- Normalize

Normalize::Normalize(int features) : mean(Eigen::ArrayXd::Zero(features)), scale(Eigen::ArrayXd::Ones(features)) {}

void Normalize::fit(const Tensor& inputs) {
  if (inputs.stride() != mean.size() || inputs.batch() < 1) throw Error(ErrorCode::InvalidArgument, "normalization fit shape mismatch");
  const auto x = inputs.rows().array();
  mean = x.colwise().mean().transpose();
  const Eigen::ArrayXd var = (x.rowwise() - mean.transpose()).square().colwise().mean().transpose();
  for (Eigen::Index i = 0; i < var.size(); ++i) scale[i] = var[i] > 0.0 ? 1.0 / std::sqrt(var[i]) : 1.0;
}

Tensor Normalize::forward(const Tensor& in, bool) {
  if (in.stride() != mean.size()) throw Error(ErrorCode::InvalidArgument, "normalization input width mismatch");
  Tensor out = in;
  out.rows() = ((in.rows().array().rowwise() - mean.transpose()).rowwise() * scale.transpose()).matrix();
  return out;
}

Tensor Normalize::backward(const Tensor& grad_out) {
  Tensor gin = grad_out;
  gin.rows() = (grad_out.rows().array().rowwise() * scale.transpose()).matrix();
  return gin;
}

// --- Split heads

SplitHeads::SplitHeads(int in, int width)
    : in_(in), width_(width), hidden_{Dense(in, width), Dense(in, width)}, out_{Dense(width, 1), Dense(width, 1)} {}

SplitHeads::SplitHeads(const SplitHeads& other) = default;

void SplitHeads::init_he(Rng& rng) {
  for (int i = 0; i < 2; ++i) {
    hidden_[i].init_he(rng);
    out_[i].init_zero();
  }
}

std::vector<Param> SplitHeads::params() {
  std::vector<Param> p;
  for (int i = 0; i < 2; ++i) {
    for (auto q : hidden_[i].params()) p.push_back(q);
    for (auto q : out_[i].params()) p.push_back(q);
  }
  return p;
}

std::vector<Eigen::ArrayXd*> SplitHeads::buffers() {
  std::vector<Eigen::ArrayXd*> p;
  for (int i = 0; i < 2; ++i) {
    for (auto q : hidden_[i].buffers()) p.push_back(q);
    for (auto q : out_[i].buffers()) p.push_back(q);
  }
  return p;
}

Tensor SplitHeads::forward(const Tensor& in, bool training) {
  Tensor out({in.batch(), 2});
  for (int i = 0; i < 2; ++i) {
    const Tensor y = out_[i].forward(act_[i].forward(hidden_[i].forward(in, training), training), training);
    out.rows().col(i) = y.rows().col(0);
  }
  return out;
}

Tensor SplitHeads::backward(const Tensor& grad_out) {
  Tensor gin;
  for (int i = 0; i < 2; ++i) {
    Tensor g({grad_out.batch(), 1});
    g.rows().col(0) = grad_out.rows().col(i);
    Tensor gi = hidden_[i].backward(act_[i].backward(out_[i].backward(g)));
    if (i == 0) gin = std::move(gi);
    else gin.values += gi.values;
  }
  return gin;
}

}  // namespace pdl::nn
