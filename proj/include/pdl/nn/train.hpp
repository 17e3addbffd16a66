#pragma once

#include "pdl/nn/model.hpp"

namespace pdl::nn {

struct Split {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
};

/// Seeded 70/20/10 partition of n indices.
Split split_indices(int n, std::uint64_t seed);

/// Rows `idx` of a batch-first tensor.
Tensor gather(const Tensor& t, std::span<const int> idx);

struct TrainOptions {
  int max_epochs = 500;
  int batch_size = 32;
  int patience = 20;
  std::uint64_t seed = 7;
  bool augment = false;  // image inputs only
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
  double best_validation = 0.0;
  bool stopped_early = false;
};

/// Mini-batch Adam on normalized targets with early stopping; the model ends
/// with the best-validation parameters.
TrainHistory train(Model& model, const Tensor& x_train, const Tensor& y_train, const Tensor& x_val, const Tensor& y_val,
                   const TrainOptions& options);

/// Random x-axis flip or periodic shift of each [C, H, W] sample.
void augment_images(Tensor& batch, Rng& rng);

/// Predictions in target units.
Eigen::MatrixX2d predict(Model& model, const Tensor& x);
std::array<double, 2> evaluate_mae(Model& model, const Tensor& x, const Eigen::MatrixX2d& y);
std::array<double, 2> mean_absolute_error(const Eigen::MatrixX2d& pred, const Eigen::MatrixX2d& y);

struct RegressionReport {
  Split split;
  TrainHistory history;
  std::array<double, 2> test_mae{};
  std::array<double, 2> baseline_mae{};  // constant predictor at the training mean
};

/// Split, fit input and target normalization on the training part, train, and
/// score the test part.
RegressionReport fit_regressor(Model& model, const Tensor& inputs, const Eigen::MatrixX2d& targets,
                               const TrainOptions& options);

}  // namespace pdl::nn
