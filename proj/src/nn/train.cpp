#include "pdl/nn/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace pdl::nn {

Split split_indices(int n, std::uint64_t seed) {
  if (n < 3) throw Error(ErrorCode::InvalidArgument, "need at least three samples to split");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  const int n_train = static_cast<int>(std::floor(0.7 * n + 1e-9));
  const int n_val = static_cast<int>(std::floor(0.2 * n + 1e-9));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.validation.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  if (s.train.empty() || s.validation.empty() || s.test.empty()) throw Error(ErrorCode::InvalidArgument, "empty data split");
  return s;
}

Tensor gather(const Tensor& t, std::span<const int> idx) {
  std::vector<int> dims = t.shape;
  dims[0] = static_cast<int>(idx.size());
  Tensor out(dims);
  const Eigen::Index s = t.stride();
  for (std::size_t i = 0; i < idx.size(); ++i) out.values.segment(static_cast<Eigen::Index>(i) * s, s) = t.values.segment(idx[i] * s, s);
  return out;
}

void augment_images(Tensor& batch, Rng& rng) {
  if (batch.shape.size() != 4) throw Error(ErrorCode::InvalidArgument, "augmentation needs image batches");
  const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Tensor src = batch;
  for (int n = 0; n < batch.batch(); ++n) {
    const auto choice = rng.below(3);
    int dx = 0, dy = 0;
    bool flip = false;
    if (choice == 1) flip = true;
    if (choice == 2) {
      dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
      dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
    }
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const int sy = flip ? h - 1 - y : wrap_index(y - dy, h);
          batch.at(n, ch, y, x) = src.at(n, ch, sy, wrap_index(x - dx, w));
        }
  }
}

namespace {

double data_loss(Model& model, const Tensor& x, const Tensor& y, int batch_size) {
  double sum = 0.0;
  for (int first = 0; first < x.batch(); first += batch_size) {
    const int n = std::min(batch_size, x.batch() - first);
    const Tensor pred = model.forward(x.slice(first, n));
    sum += (pred.values - y.slice(first, n).values).square().sum();
  }
  return sum / x.batch();
}

}  // namespace

TrainHistory train(Model& model, const Tensor& x_train, const Tensor& y_train, const Tensor& x_val, const Tensor& y_val,
                   const TrainOptions& opt) {
  if (x_train.batch() < 1 || x_val.batch() < 1) throw Error(ErrorCode::InvalidArgument, "empty training or validation split");
  if (y_train.batch() != x_train.batch() || y_val.batch() != x_val.batch()) throw Error(ErrorCode::InvalidArgument, "input/target count mismatch");
  if (opt.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  Rng rng(opt.seed);
  AdamState adam;
  TrainHistory hist;
  hist.best_validation = std::numeric_limits<double>::infinity();
  Eigen::ArrayXd best = model.flat_parameters();
  int bad = 0;
  std::vector<int> order(static_cast<std::size_t>(x_train.batch()));
  std::iota(order.begin(), order.end(), 0);
  const double l2 = model.spec().l2;

  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(opt.batch_size), order.size() - first);
      const std::span<const int> idx(order.data() + first, n);
      Tensor xb = gather(x_train, idx);
      const Tensor yb = gather(y_train, idx);
      if (opt.augment) augment_images(xb, rng);
      model.zero_grad();
      const Tensor pred = model.forward(xb, true);
      const auto params = model.params();
      const double loss = loss_mse_l2(pred, yb, params, l2);
      if (!std::isfinite(loss)) throw Error(ErrorCode::Numeric, "training loss is not finite");
      epoch_loss += loss * static_cast<double>(n);
      model.backward(mse_gradient(pred, yb));
      add_l2_gradient(params, l2);
      adam_step(params, adam, model.spec().learning_rate);
    }
    hist.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double val = data_loss(model, x_val, y_val, opt.batch_size);
    if (!std::isfinite(val)) throw Error(ErrorCode::Numeric, "validation loss is not finite");
    hist.validation_loss.push_back(val);
    if (val < hist.best_validation) {
      hist.best_validation = val;
      hist.best_epoch = epoch;
      best = model.flat_parameters();
      bad = 0;
    } else if (++bad > opt.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  model.set_flat_parameters(best);
  return hist;
}

Eigen::MatrixX2d predict(Model& model, const Tensor& x) {
  Eigen::MatrixX2d z(x.batch(), 2);
  for (int first = 0; first < x.batch(); first += 64) {
    const int n = std::min(64, x.batch() - first);
    const Tensor p = model.forward(x.slice(first, n));
    z.middleRows(first, n) = p.rows();
  }
  return model.targets.invert(z);
}

std::array<double, 2> mean_absolute_error(const Eigen::MatrixX2d& pred, const Eigen::MatrixX2d& y) {
  if (y.rows() == 0 || pred.rows() != y.rows()) throw Error(ErrorCode::InvalidArgument, "MAE needs matching non-empty sets");
  const Eigen::RowVector2d mae = (pred - y).cwiseAbs().colwise().mean();
  return {mae(0), mae(1)};
}

std::array<double, 2> evaluate_mae(Model& model, const Tensor& x, const Eigen::MatrixX2d& y) {
  if (x.batch() == 0) throw Error(ErrorCode::InvalidArgument, "empty test set");
  return mean_absolute_error(predict(model, x), y);
}

namespace {

Eigen::MatrixX2d rows_of(const Eigen::MatrixX2d& m, std::span<const int> idx) {
  Eigen::MatrixX2d out(static_cast<Eigen::Index>(idx.size()), 2);
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

Tensor as_tensor(const Eigen::MatrixX2d& m) {
  Tensor t({static_cast<int>(m.rows()), 2});
  t.rows() = m;
  return t;
}

}  // namespace

RegressionReport fit_regressor(Model& model, const Tensor& inputs, const Eigen::MatrixX2d& targets, const TrainOptions& opt) {
  if (inputs.batch() != targets.rows()) throw Error(ErrorCode::InvalidArgument, "input/target count mismatch");
  RegressionReport r;
  r.split = split_indices(inputs.batch(), opt.seed);
  const Tensor xt = gather(inputs, r.split.train);
  const Tensor xv = gather(inputs, r.split.validation);
  const Tensor xs = gather(inputs, r.split.test);
  const Eigen::MatrixX2d yt = rows_of(targets, r.split.train);
  const Eigen::MatrixX2d yv = rows_of(targets, r.split.validation);
  const Eigen::MatrixX2d ys = rows_of(targets, r.split.test);

  if (Normalize* norm = model.input_normalization()) norm->fit(xt);
  model.targets = fit_normalizer(yt);
  r.history = train(model, xt, as_tensor(model.targets.apply(yt)), xv, as_tensor(model.targets.apply(yv)), opt);
  r.test_mae = evaluate_mae(model, xs, ys);
  const Eigen::RowVector2d mean = yt.colwise().mean();
  r.baseline_mae = mean_absolute_error(mean.replicate(ys.rows(), 1), ys);
  return r;
}

}  // namespace pdl::nn
