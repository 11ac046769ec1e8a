#include "cqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cqa/errors.hpp"
#include "cqa/rng.hpp"

namespace cqa {

namespace {

// log(1 + exp(-t)) without overflow on either side
inline double log1p_exp_neg(double t) {
  if (t >= 0.0) return std::log1p(std::exp(-t));
  return -t + std::log1p(std::exp(t));
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_problem(const std::vector<std::vector<double>>& X,
                   const std::vector<int>& y) {
  if (X.empty()) throw IntegrityError("training set is empty");
  if (X.size() != y.size())
    throw IntegrityError("feature rows and labels differ in length");
  const size_t d = X[0].size();
  for (const auto& row : X)
    if (row.size() != d) throw IntegrityError("ragged feature matrix");
  bool pos = false, neg = false;
  for (int label : y) {
    if (label == 1)
      pos = true;
    else if (label == -1)
      neg = true;
    else
      throw IntegrityError("labels must be +1 or -1");
  }
  if (!pos || !neg)
    throw IntegrityError("training set contains a single class");
}

}  // namespace

double logreg_objective(const std::vector<std::vector<double>>& X,
                        const std::vector<int>& y, double c,
                        const std::vector<double>& w, double b,
                        bool regularize_bias) {
  double obj = 0.0;
  for (double wi : w) obj += wi * wi;
  if (regularize_bias) obj += b * b;
  obj *= 0.5;
  for (size_t i = 0; i < X.size(); ++i) {
    double margin = b;
    for (size_t j = 0; j < w.size(); ++j) margin += w[j] * X[i][j];
    obj += c * log1p_exp_neg(y[i] * margin);
  }
  return obj;
}

void logreg_gradient(const std::vector<std::vector<double>>& X,
                     const std::vector<int>& y, double c,
                     const std::vector<double>& w, double b,
                     bool regularize_bias, std::vector<double>& grad_w,
                     double& grad_b) {
  grad_w = w;
  grad_b = regularize_bias ? b : 0.0;
  for (size_t i = 0; i < X.size(); ++i) {
    double margin = b;
    for (size_t j = 0; j < w.size(); ++j) margin += w[j] * X[i][j];
    // d/dm log(1+exp(-y m)) = -y sigma(-y m)
    const double coef = -c * y[i] * sigmoid(-y[i] * margin);
    for (size_t j = 0; j < w.size(); ++j) grad_w[j] += coef * X[i][j];
    grad_b += coef;
  }
}

LogRegModel train_logreg(const std::vector<std::vector<double>>& X,
                         const std::vector<int>& y, double c,
                         const TrainOptions& opts, OptimizeTrace* trace) {
  check_problem(X, y);
  if (c <= 0.0) throw ConfigError("cost C must be positive");
  const size_t d = X[0].size();
  const size_t n_params = d + 1;  // weights then bias

  // theta = [w; b]
  std::vector<double> theta(n_params, 0.0);
  std::vector<double> grad(n_params), w(d);

  auto eval = [&](const std::vector<double>& t, std::vector<double>* g) {
    std::copy(t.begin(), t.begin() + d, w.begin());
    const double b = t[d];
    if (g) {
      std::vector<double> gw;
      double gb;
      logreg_gradient(X, y, c, w, b, opts.regularize_bias, gw, gb);
      std::copy(gw.begin(), gw.end(), g->begin());
      (*g)[d] = gb;
    }
    return logreg_objective(X, y, c, w, b, opts.regularize_bias);
  };

  double f = eval(theta, &grad);
  if (!std::isfinite(f)) throw NumericError("objective is not finite at the origin");
  double g0_norm = 0.0;
  for (double g : grad) g0_norm += g * g;
  g0_norm = std::sqrt(g0_norm);
  const double gtol = opts.tolerance * std::max(1.0, g0_norm);

  OptimizeTrace local;
  OptimizeTrace& tr = trace ? *trace : local;
  tr.objective_history.clear();
  tr.objective_history.push_back(f);

  // L-BFGS with memory 10 and Armijo backtracking.
  constexpr size_t kMemory = 10;
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> dir(n_params), theta_new(n_params), grad_new(n_params);
  std::vector<double> alpha_buf(kMemory);

  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    double gnorm = 0.0;
    for (double g : grad) gnorm += g * g;
    gnorm = std::sqrt(gnorm);
    if (gnorm <= gtol) {
      tr.converged = true;
      break;
    }

    // two-loop recursion
    dir = grad;
    const size_t m = s_hist.size();
    for (size_t k = m; k-- > 0;) {
      double a = 0.0;
      for (size_t j = 0; j < n_params; ++j) a += s_hist[k][j] * dir[j];
      a *= rho_hist[k];
      alpha_buf[k] = a;
      for (size_t j = 0; j < n_params; ++j) dir[j] -= a * y_hist[k][j];
    }
    if (m > 0) {
      double sy = 0.0, yy = 0.0;
      for (size_t j = 0; j < n_params; ++j) {
        sy += s_hist[m - 1][j] * y_hist[m - 1][j];
        yy += y_hist[m - 1][j] * y_hist[m - 1][j];
      }
      const double gamma = sy / yy;
      for (double& v : dir) v *= gamma;
    }
    for (size_t k = 0; k < m; ++k) {
      double beta = 0.0;
      for (size_t j = 0; j < n_params; ++j) beta += y_hist[k][j] * dir[j];
      beta *= rho_hist[k];
      for (size_t j = 0; j < n_params; ++j)
        dir[j] += (alpha_buf[k] - beta) * s_hist[k][j];
    }
    for (double& v : dir) v = -v;

    double dg = 0.0;
    for (size_t j = 0; j < n_params; ++j) dg += dir[j] * grad[j];
    if (dg >= 0.0) {
      // not a descent direction; drop the history and use steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (size_t j = 0; j < n_params; ++j) dir[j] = -grad[j];
      dg = -gnorm * gnorm;
    }

    // backtracking line search, Armijo condition
    double step = (m == 0) ? std::min(1.0, 1.0 / gnorm) : 1.0;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (size_t j = 0; j < n_params; ++j)
        theta_new[j] = theta[j] + step * dir[j];
      f_new = eval(theta_new, &grad_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * dg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // ran out of step sizes; gradient check below decides

    // curvature pair
    std::vector<double> s(n_params), yv(n_params);
    double sy = 0.0;
    for (size_t j = 0; j < n_params; ++j) {
      s[j] = theta_new[j] - theta[j];
      yv[j] = grad_new[j] - grad[j];
      sy += s[j] * yv[j];
    }
    if (sy > 1e-12) {
      if (s_hist.size() == kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
    }

    theta.swap(theta_new);
    grad.swap(grad_new);
    f = f_new;
    tr.objective_history.push_back(f);
  }
  if (!tr.converged) {
    double gnorm = 0.0;
    for (double g : grad) gnorm += g * g;
    tr.converged = std::sqrt(gnorm) <= gtol;
  }
  tr.iterations = iter;

  LogRegModel model;
  model.weights.assign(theta.begin(), theta.begin() + d);
  model.bias = theta[d];
  model.cost_c = c;
  for (double wi : model.weights)
    if (!std::isfinite(wi)) throw NumericError("optimizer produced non-finite weights");
  if (!std::isfinite(model.bias))
    throw NumericError("optimizer produced a non-finite bias");
  return model;
}

double predict_proba(const LogRegModel& model, const std::vector<double>& x) {
  if (x.size() != model.weights.size())
    throw std::invalid_argument("predict_proba: dimension mismatch");
  double margin = model.bias;
  for (size_t j = 0; j < x.size(); ++j) margin += model.weights[j] * x[j];
  return sigmoid(margin);
}

CvResult cross_validate_c(const std::vector<std::vector<double>>& X,
                          const std::vector<int>& y, const TrainOptions& opts) {
  if (opts.folds < 2) throw ConfigError("cross-validation needs folds >= 2");
  if (opts.cost_grid.empty()) throw ConfigError("cost grid is empty");
  for (double c : opts.cost_grid)
    if (c <= 0.0) throw ConfigError("cost grid values must be positive");
  const size_t n = X.size();
  if (n < static_cast<size_t>(opts.folds))
    throw ConfigError("fewer training rows than folds");
  if (y.size() != n) throw IntegrityError("feature rows and labels differ in length");

  // one seeded shuffle, then contiguous folds
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(opts.seed);
  for (size_t i = n - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }

  CvResult result;
  for (double c : opts.cost_grid) {
    CvRow row;
    row.c = c;
    size_t total_correct = 0;
    for (int f = 0; f < opts.folds; ++f) {
      const size_t lo = f * n / opts.folds;
      const size_t hi = (f + 1) * n / opts.folds;
      std::vector<std::vector<double>> train_x;
      std::vector<int> train_y;
      train_x.reserve(n - (hi - lo));
      train_y.reserve(n - (hi - lo));
      for (size_t i = 0; i < n; ++i) {
        if (i >= lo && i < hi) continue;
        train_x.push_back(X[order[i]]);
        train_y.push_back(y[order[i]]);
      }
      bool single_class = true;
      for (size_t i = 1; i < train_y.size(); ++i)
        if (train_y[i] != train_y[0]) {
          single_class = false;
          break;
        }
      size_t correct = 0;
      if (single_class) {
        // cannot fit; score the fold with the constant majority prediction
        row.degenerate_fold = true;
        for (size_t i = lo; i < hi; ++i)
          if (y[order[i]] == train_y[0]) ++correct;
      } else {
        const LogRegModel m = train_logreg(train_x, train_y, c, opts);
        for (size_t i = lo; i < hi; ++i) {
          const int pred = predict_proba(m, X[order[i]]) >= 0.5 ? 1 : -1;
          if (pred == y[order[i]]) ++correct;
        }
      }
      row.fold_accuracy.push_back(static_cast<double>(correct) /
                                  static_cast<double>(hi - lo));
      total_correct += correct;
    }
    row.accuracy = static_cast<double>(total_correct) / static_cast<double>(n);
    result.table.push_back(std::move(row));
  }

  const CvRow* best = &result.table[0];
  for (const CvRow& row : result.table) {
    if (row.accuracy > best->accuracy ||
        (row.accuracy == best->accuracy && row.c < best->c))
      best = &row;
  }
  result.best_c = best->c;
  return result;
}

void save_model_json(const std::string& path, const LogRegModel& model) {
  nlohmann::ordered_json j;
  j["schema_hash"] = model.schema_hash;
  j["cost_c"] = model.cost_c;
  j["bias"] = model.bias;
  j["weights"] = model.weights;
  j["scaler"] = {{"min", model.scaler.min}, {"max", model.scaler.max}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model: " + path);
  out << j.dump(2) << '\n';
}

LogRegModel load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("bad model json in " + path + ": " + e.what());
  }
  LogRegModel model;
  try {
    model.schema_hash = j.at("schema_hash").get<uint64_t>();
    model.cost_c = j.at("cost_c").get<double>();
    model.bias = j.at("bias").get<double>();
    model.weights = j.at("weights").get<std::vector<double>>();
    model.scaler.min = j.at("scaler").at("min").get<std::vector<double>>();
    model.scaler.max = j.at("scaler").at("max").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad model json in " + path + ": " + e.what());
  }
  for (double w : model.weights)
    if (!std::isfinite(w)) throw FormatError("non-finite weight in " + path);
  if (!std::isfinite(model.bias)) throw FormatError("non-finite bias in " + path);
  if (model.scaler.min.size() != model.weights.size() ||
      model.scaler.max.size() != model.weights.size())
    throw FormatError("scaler size does not match weights in " + path);
  return model;
}

}  // namespace cqa
