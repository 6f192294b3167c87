#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/classifiers/common.hpp"

namespace kneehar::ml {

enum class Kernel { Linear, Rbf };

inline std::string_view kernel_name(Kernel k) { return k == Kernel::Linear ? "linear" : "rbf"; }

inline Kernel parse_kernel(std::string_view s) {
  if (s == "linear") return Kernel::Linear;
  if (s == "rbf") return Kernel::Rbf;
  throw UsageError("unknown kernel '" + std::string(s) + "' (valid: linear, rbf)");
}

struct SvmParams {
  double C = 1.0;
  double gamma = 1.0;  // rbf only
  Kernel kernel = Kernel::Rbf;
  double tol = 1e-3;          // KKT violation tolerance
  std::size_t max_iter = 0;   // 0: max(10^7, 100 n)

  bool operator==(const SvmParams&) const = default;

  void validate() const {
    if (!(C > 0.0)) throw UsageError("C must be positive");
    if (kernel == Kernel::Rbf && !(gamma > 0.0)) throw UsageError("gamma must be positive");
    if (!(tol > 0.0)) throw UsageError("tol must be positive");
  }
};

struct KernelFunction {
  Kernel kind = Kernel::Rbf;
  double gamma = 1.0;

  double operator()(std::span<const double> u, std::span<const double> v) const {
    double s = 0.0;
    if (kind == Kernel::Linear) {
      for (std::size_t j = 0; j < u.size(); ++j) s += u[j] * v[j];
      return s;
    }
    for (std::size_t j = 0; j < u.size(); ++j) {
      const double d = u[j] - v[j];
      s += d * d;
    }
    return std::exp(-gamma * s);
  }

  /// Full symmetric Gram matrix of the rows of X.
  Matrix gram(const Matrix& X) const {
    const std::size_t n = X.rows();
    Matrix K(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const double v = (*this)(X.row(i), X.row(j));
        K(i, j) = v;
        K(j, i) = v;
      }
    }
    return K;
  }
};

/// Dual solution of one binary soft-margin problem:
///   min 0.5 a'Qa - sum(a)  s.t. 0 <= a_i <= C, sum(y_i a_i) = 0,
/// with Q_ij = y_i y_j K_ij. Decision value is sum(a_i y_i K(x_i, x)) - rho.
struct BinarySvmSolution {
  std::vector<double> alpha;
  double rho = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// SMO with second-order working-set selection, no shrinking.
inline BinarySvmSolution solve_binary_svm(const Matrix& K, std::span<const double> y, double C,
                                          double tol, std::size_t max_iter = 0) {
  const std::size_t n = y.size();
  if (K.rows() != n || K.cols() != n) throw DataError("svm: kernel matrix shape mismatch");
  if (max_iter == 0) max_iter = std::max<std::size_t>(10'000'000, 100 * n);
  constexpr double kTau = 1e-12;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> alpha(n, 0.0);
  std::vector<double> G(n, -1.0);
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };
  auto Q = [&](std::size_t a, std::size_t b) { return y[a] * y[b] * K(a, b); };

  std::size_t iter = 0;
  while (true) {
    double gmax = -kInf;
    double gmax2 = -kInf;
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!upper(t) && -G[t] >= gmax) {
          gmax = -G[t];
          i = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!lower(t) && G[t] >= gmax) {
        gmax = G[t];
        i = static_cast<std::ptrdiff_t>(t);
      }
    }
    std::ptrdiff_t j = -1;
    double best_obj = kInf;
    if (i >= 0) {
      const auto ui = static_cast<std::size_t>(i);
      for (std::size_t t = 0; t < n; ++t) {
        double grad_diff = 0.0;
        if (y[t] > 0) {
          if (lower(t)) continue;
          grad_diff = gmax + G[t];
          gmax2 = std::max(gmax2, G[t]);
        } else {
          if (upper(t)) continue;
          grad_diff = gmax - G[t];
          gmax2 = std::max(gmax2, -G[t]);
        }
        if (grad_diff > 0.0) {
          const double quad = K(ui, ui) + K(t, t) - 2.0 * K(ui, t);
          const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
          if (obj <= best_obj) {
            best_obj = obj;
            j = static_cast<std::ptrdiff_t>(t);
          }
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < tol) break;
    if (iter >= max_iter) {
      throw NumericalError("svm: solver did not converge within " + std::to_string(max_iter) +
                           " iterations");
    }
    ++iter;

    const auto a = static_cast<std::size_t>(i);
    const auto b = static_cast<std::size_t>(j);
    const double old_a = alpha[a];
    const double old_b = alpha[b];
    if (y[a] != y[b]) {
      double quad = K(a, a) + K(b, b) + 2.0 * Q(a, b);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G[a] - G[b]) / quad;
      const double diff = alpha[a] - alpha[b];
      alpha[a] += delta;
      alpha[b] += delta;
      if (diff > 0.0) {
        if (alpha[b] < 0.0) {
          alpha[b] = 0.0;
          alpha[a] = diff;
        }
      } else if (alpha[a] < 0.0) {
        alpha[a] = 0.0;
        alpha[b] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[a] > C) {
          alpha[a] = C;
          alpha[b] = C - diff;
        }
      } else if (alpha[b] > C) {
        alpha[b] = C;
        alpha[a] = C + diff;
      }
    } else {
      double quad = K(a, a) + K(b, b) - 2.0 * Q(a, b);
      if (quad <= 0.0) quad = kTau;
      const double delta = (G[a] - G[b]) / quad;
      const double sum = alpha[a] + alpha[b];
      alpha[a] -= delta;
      alpha[b] += delta;
      if (sum > C) {
        if (alpha[a] > C) {
          alpha[a] = C;
          alpha[b] = sum - C;
        }
      } else if (alpha[b] < 0.0) {
        alpha[b] = 0.0;
        alpha[a] = sum;
      }
      if (sum > C) {
        if (alpha[b] > C) {
          alpha[b] = C;
          alpha[a] = sum - C;
        }
      } else if (alpha[a] < 0.0) {
        alpha[a] = 0.0;
        alpha[b] = sum;
      }
    }
    const double da = alpha[a] - old_a;
    const double db = alpha[b] - old_b;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(a, t) * da + Q(b, t) * db;
  }

  // Offset from free variables, or the midpoint of the feasible interval.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  BinarySvmSolution sol;
  sol.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (G[t] - 1.0);
  sol.objective = obj / 2.0;
  sol.alpha = std::move(alpha);
  sol.iterations = iter;
  return sol;
}

/// One-vs-rest soft-margin SVM. Scores are the raw decision values of the
/// per-class machines (not probabilities).
class Svm {
 public:
  Svm() = default;

  static Svm fit(const Matrix& X, std::span<const int> y, const SvmParams& p) {
    check_training_input(X, y, "svm");
    p.validate();
    const auto ci = index_classes(y);
    if (ci.size() < 2) throw DataError("svm: need at least two classes");
    const std::size_t n = X.rows();
    const KernelFunction kernel{p.kernel, p.gamma};
    const Matrix K = kernel.gram(X);

    Svm m;
    m.classes_ = ci.classes;
    m.kernel_ = kernel;
    m.n_features_ = X.cols();

    std::vector<std::vector<double>> dense_coef;
    std::vector<char> is_sv(n, 0);
    std::vector<double> sign(n);
    for (std::size_t c = 0; c < ci.size(); ++c) {
      for (std::size_t i = 0; i < n; ++i) sign[i] = ci.index[i] == c ? 1.0 : -1.0;
      auto sol = solve_binary_svm(K, sign, p.C, p.tol, p.max_iter);
      std::vector<double> coef(n);
      for (std::size_t i = 0; i < n; ++i) {
        coef[i] = sol.alpha[i] * sign[i];
        if (sol.alpha[i] > 0.0) is_sv[i] = 1;
      }
      dense_coef.push_back(std::move(coef));
      m.rho_.push_back(sol.rho);
      m.objective_.push_back(sol.objective);
    }

    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_sv[i]) sv.push_back(i);
    }
    m.support_ = X.select_rows(sv);
    for (const auto& coef : dense_coef) {
      std::vector<double> c;
      for (auto i : sv) c.push_back(coef[i]);
      m.coef_.push_back(std::move(c));
    }
    return m;
  }

  Matrix decision_function(const Matrix& X) const {
    check_dimension(n_features_, X.cols());
    Matrix out(X.rows(), classes_.size());
    std::vector<double> kx(support_.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      for (std::size_t s = 0; s < support_.rows(); ++s) kx[s] = kernel_(support_.row(s), X.row(i));
      for (std::size_t c = 0; c < classes_.size(); ++c) {
        double f = 0.0;
        for (std::size_t s = 0; s < kx.size(); ++s) f += coef_[c][s] * kx[s];
        out(i, c) = f - rho_[c];
      }
    }
    return out;
  }

  Matrix predict_scores(const Matrix& X) const { return decision_function(X); }

  const std::vector<int>& classes() const noexcept { return classes_; }
  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t n_support() const noexcept { return support_.rows(); }
  const std::vector<double>& dual_objectives() const noexcept { return objective_; }

  nlohmann::json to_json() const {
    return {{"classes", classes_},
            {"kernel", kernel_name(kernel_.kind)},
            {"gamma", kernel_.gamma},
            {"n_features", n_features_},
            {"support", std::vector<double>(support_.data().begin(), support_.data().end())},
            {"coef", coef_},
            {"rho", rho_},
            {"objective", objective_}};
  }

  static Svm from_json(const nlohmann::json& j) {
    Svm m;
    m.classes_ = j.at("classes").get<std::vector<int>>();
    m.kernel_ = {parse_kernel(j.at("kernel").get<std::string>()), j.at("gamma").get<double>()};
    m.n_features_ = j.at("n_features").get<std::size_t>();
    const auto flat = j.at("support").get<std::vector<double>>();
    m.coef_ = j.at("coef").get<std::vector<std::vector<double>>>();
    m.rho_ = j.at("rho").get<std::vector<double>>();
    m.objective_ = j.at("objective").get<std::vector<double>>();
    if (m.n_features_ == 0 || flat.size() % m.n_features_ != 0) throw DataError("svm: malformed support block");
    const std::size_t n_sv = flat.size() / m.n_features_;
    m.support_ = Matrix(n_sv, m.n_features_);
    if (n_sv > 0) std::copy(flat.begin(), flat.end(), m.support_.row(0).data());
    if (m.coef_.size() != m.classes_.size() || m.rho_.size() != m.classes_.size()) {
      throw DataError("svm: malformed machine block");
    }
    for (const auto& c : m.coef_) {
      if (c.size() != n_sv) throw DataError("svm: malformed coefficient block");
    }
    return m;
  }

 private:
  std::vector<int> classes_;
  KernelFunction kernel_;
  std::size_t n_features_ = 0;
  Matrix support_;
  std::vector<std::vector<double>> coef_;
  std::vector<double> rho_;
  std::vector<double> objective_;
};

}  // namespace kneehar::ml
