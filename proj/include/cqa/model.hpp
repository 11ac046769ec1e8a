#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cqa/features.hpp"

namespace cqa {

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  double cost_c = 1.0;
  ScalerParams scaler;
  uint64_t schema_hash = 0;
};

struct TrainOptions {
  std::vector<double> cost_grid = {0.01, 0.05, 0.1, 0.55, 1.0, 5.0, 10.0};
  int folds = 5;
  double tolerance = 1e-8;  // on the gradient norm, relative to the start
  int max_iterations = 500;
  uint64_t seed = 1;
  bool regularize_bias = false;  // default: unregularized intercept
};

// f(w, b) = 1/2 |w|^2 + C sum_i log(1 + exp(-y_i (w.x_i + b))),
// with b added to the penalty when regularize_bias is set.
double logreg_objective(const std::vector<std::vector<double>>& X,
                        const std::vector<int>& y, double c,
                        const std::vector<double>& w, double b,
                        bool regularize_bias = false);
void logreg_gradient(const std::vector<std::vector<double>>& X,
                     const std::vector<int>& y, double c,
                     const std::vector<double>& w, double b,
                     bool regularize_bias, std::vector<double>& grad_w,
                     double& grad_b);

struct OptimizeTrace {
  std::vector<double> objective_history;  // value after every accepted step
  int iterations = 0;
  bool converged = false;
};

// Deterministic L-BFGS minimization of the objective above, stopping at
// |g| <= tolerance * max(1, |g0|) or max_iterations. Labels are +1 / -1;
// a single-class training set raises IntegrityError.
LogRegModel train_logreg(const std::vector<std::vector<double>>& X,
                         const std::vector<int>& y, double c,
                         const TrainOptions& opts,
                         OptimizeTrace* trace = nullptr);

// sigma(w.x + b); x must already be scaled with the model's own scaler.
double predict_proba(const LogRegModel& model, const std::vector<double>& x);

struct CvRow {
  double c = 0.0;
  double accuracy = 0.0;  // pooled over folds: total correct / n
  std::vector<double> fold_accuracy;
  bool degenerate_fold = false;  // some fold had a single-class side
};

struct CvResult {
  double best_c = 0.0;
  std::vector<CvRow> table;
};

// One seeded shuffle, contiguous folds, ties broken toward the smaller C.
CvResult cross_validate_c(const std::vector<std::vector<double>>& X,
                          const std::vector<int>& y, const TrainOptions& opts);

// JSON model file: {schema_hash, cost_c, bias, weights[], scaler{min[],max[]}}.
void save_model_json(const std::string& path, const LogRegModel& model);
LogRegModel load_model_json(const std::string& path);

}  // namespace cqa
