#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "awe/common.hpp"
#include "awe/kernel.hpp"

namespace awe {

struct SmoOptions {
  double tolerance = 1e-3;  // KKT tolerance
  double epsilon = 1e-3;    // minimum relative change of a multiplier
  std::size_t max_steps = 0;  // 0: 1000 * n + 100000
};

// Soft-margin binary SVM on a precomputed kernel:
// f(x) = sum_i coef_i K(support_i, x) - bias, coef_i = alpha_i y_i.
struct BinarySvm {
  std::vector<std::size_t> support;  // indices into the training set
  std::vector<double> coef;
  std::vector<double> alpha;  // all multipliers, training order
  double bias = 0.0;
  std::size_t steps = 0;

  template <typename KernelRow>
  double decision(KernelRow&& k) const {
    double f = -bias;
    for (std::size_t s = 0; s < support.size(); ++s) f += coef[s] * k(support[s]);
    return f;
  }
};

namespace detail {

// Platt's SMO: outer loop alternates full passes and passes over non-bound
// multipliers; the second multiplier maximizes |E1 - E2|, then falls back to
// scanning non-bound and then all examples in index order.
template <typename Kernel>
class Smo {
 public:
  Smo(Kernel kernel, const std::vector<int>& y, double C, const SmoOptions& opt)
      : K_(kernel), y_(y), n_(y.size()), C_(C), opt_(opt), alpha_(n_, 0.0), error_(n_) {
    for (std::size_t i = 0; i < n_; ++i) error_[i] = -static_cast<double>(y_[i]);
  }

  BinarySvm solve(const std::string& name) {
    const std::size_t budget = opt_.max_steps ? opt_.max_steps : 1000 * n_ + 100000;
    std::size_t changed = 0;
    bool examine_all = true;
    std::size_t loops = 0;
    while (changed > 0 || examine_all) {
      changed = 0;
      for (std::size_t i = 0; i < n_; ++i)
        if (examine_all || non_bound(i)) changed += examine(i);
      if (examine_all) examine_all = false;
      else if (changed == 0) examine_all = true;
      if (steps_ > budget || ++loops > budget)
        throw ComputeError("SMO did not converge within " + std::to_string(budget) + " steps for " + name);
    }
    BinarySvm out;
    out.alpha = alpha_;
    out.bias = b_;
    out.steps = steps_;
    for (std::size_t i = 0; i < n_; ++i)
      if (alpha_[i] > 0.0) {
        out.support.push_back(i);
        out.coef.push_back(alpha_[i] * y_[i]);
      }
    return out;
  }

 private:
  bool non_bound(std::size_t i) const { return alpha_[i] > 0.0 && alpha_[i] < C_; }

  int examine(std::size_t i2) {
    const double r2 = error_[i2] * y_[i2];
    if (!((r2 < -opt_.tolerance && alpha_[i2] < C_) || (r2 > opt_.tolerance && alpha_[i2] > 0.0))) return 0;
    std::size_t best = n_;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < n_; ++i)
      if (non_bound(i) && std::abs(error_[i] - error_[i2]) > best_gap) {
        best_gap = std::abs(error_[i] - error_[i2]);
        best = i;
      }
    if (best < n_ && take_step(best, i2)) return 1;
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i1 = (i2 + 1 + k) % n_;
      if (non_bound(i1) && take_step(i1, i2)) return 1;
    }
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i1 = (i2 + 1 + k) % n_;
      if (take_step(i1, i2)) return 1;
    }
    return 0;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const double y1 = y_[i1], y2 = y_[i2];
    const double e1 = error_[i1], e2 = error_[i2];
    const double s = y1 * y2;
    double lo, hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(C_, C_ + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - C_);
      hi = std::min(C_, a1 + a2);
    }
    if (lo >= hi) return false;
    const double k11 = K_(i1, i1), k12 = K_(i1, i2), k22 = K_(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;
    double a2_new;
    if (eta > 0.0) {
      a2_new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // objective at both ends of the segment
      const double f1 = y1 * (e1 + b_) - a1 * k11 - s * a2 * k12;
      const double f2 = y2 * (e2 + b_) - s * a1 * k12 - a2 * k22;
      const double l1 = a1 + s * (a2 - lo), h1 = a1 + s * (a2 - hi);
      const double obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
      const double obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
      if (obj_lo < obj_hi - opt_.epsilon) a2_new = lo;
      else if (obj_lo > obj_hi + opt_.epsilon) a2_new = hi;
      else a2_new = a2;
    }
    if (a2_new < 1e-8 * C_) a2_new = 0.0;
    else if (a2_new > C_ * (1.0 - 1e-8)) a2_new = C_;
    if (std::abs(a2_new - a2) < opt_.epsilon * (a2_new + a2 + opt_.epsilon)) return false;
    double a1_new = a1 + s * (a2 - a2_new);
    if (a1_new < 0.0) {
      a2_new += s * a1_new;
      a1_new = 0.0;
    } else if (a1_new > C_) {
      a2_new += s * (a1_new - C_);
      a1_new = C_;
    }
    if (a1_new < 1e-12 * C_) a1_new = 0.0;  // roundoff
    else if (a1_new > C_ * (1.0 - 1e-12)) a1_new = C_;

    const double b1 = e1 + y1 * (a1_new - a1) * k11 + y2 * (a2_new - a2) * k12 + b_;
    const double b2 = e2 + y1 * (a1_new - a1) * k12 + y2 * (a2_new - a2) * k22 + b_;
    double b_new;
    if (a1_new > 0.0 && a1_new < C_) b_new = b1;
    else if (a2_new > 0.0 && a2_new < C_) b_new = b2;
    else b_new = 0.5 * (b1 + b2);

    const double t1 = y1 * (a1_new - a1), t2 = y2 * (a2_new - a2);
    for (std::size_t i = 0; i < n_; ++i) error_[i] += t1 * K_(i1, i) + t2 * K_(i2, i) + b_ - b_new;
    b_ = b_new;
    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    ++steps_;
    return true;
  }

  Kernel K_;
  const std::vector<int>& y_;
  std::size_t n_;
  double C_;
  SmoOptions opt_;
  std::vector<double> alpha_;
  std::vector<double> error_;  // f(x_i) - y_i
  double b_ = 0.0;
  std::size_t steps_ = 0;
};

}  // namespace detail

// `kernel(i, j)` gives K between training examples i and j; y in {-1, +1}.
template <typename Kernel>
BinarySvm smo_train(Kernel&& kernel, const std::vector<int>& y, double C, const SmoOptions& opt = {},
                    const std::string& name = "binary problem") {
  if (!(C > 0.0)) throw ValidationError("SVM C must be positive");
  for (int v : y)
    if (v != 1 && v != -1) throw ValidationError("binary SVM labels must be +1 or -1");
  detail::Smo<std::decay_t<Kernel>> smo(kernel, y, C, opt);
  return smo.solve(name);
}

// One-vs-one multiclass SVM. Pair (a, b) with a < b treats class a as +1;
// a non-negative decision value votes for a.
struct SvmModel {
  struct Pair {
    int first = 0, second = 0;
    BinarySvm svm;
    std::vector<std::size_t> members;  // training indices of this pair's examples
  };
  std::vector<int> classes;
  std::vector<Pair> pairs;
  double C = 1.0;
  std::size_t training_size = 0;
};

inline SvmModel svm_train(const DenseMatrix& gram, const std::vector<int>& labels, double C,
                          const SmoOptions& opt = {}) {
  if (gram.rows != gram.cols || gram.rows != labels.size())
    throw ValidationError("Gram matrix and labels disagree in size");
  if (!(C > 0.0)) throw ValidationError("SVM C must be positive");
  SvmModel model;
  model.C = C;
  model.training_size = labels.size();
  model.classes = labels;
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
  if (model.classes.size() < 2) throw ValidationError("SVM training needs at least two classes");
  for (std::size_t a = 0; a < model.classes.size(); ++a)
    for (std::size_t b = a + 1; b < model.classes.size(); ++b) {
      SvmModel::Pair pair;
      pair.first = model.classes[a];
      pair.second = model.classes[b];
      std::vector<int> y;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == pair.first || labels[i] == pair.second) {
          pair.members.push_back(i);
          y.push_back(labels[i] == pair.first ? 1 : -1);
        }
      const auto& idx = pair.members;
      auto kernel = [&](std::size_t i, std::size_t j) { return gram(idx[i], idx[j]); };
      pair.svm = smo_train(kernel, y, C, opt,
                           "class pair (" + std::to_string(pair.first) + ", " + std::to_string(pair.second) + ")");
      for (auto& s : pair.svm.support) s = idx[s];
      model.pairs.push_back(std::move(pair));
    }
  return model;
}

// Decision value of one pair for a kernel row against the training set.
inline double pair_decision(const SvmModel::Pair& pair, std::span<const double> row) {
  return pair.svm.decision([&](std::size_t i) { return row[i]; });
}

// `rows` holds K(test_t, train_i); votes tie toward the lowest class id.
inline std::vector<int> svm_predict(const SvmModel& model, const DenseMatrix& rows) {
  if (rows.cols != model.training_size)
    throw ValidationError("kernel rows have " + std::to_string(rows.cols) + " columns, model was trained on " +
                          std::to_string(model.training_size) + " graphs");
  std::vector<int> out(rows.rows);
  std::map<int, std::size_t> position;
  for (std::size_t c = 0; c < model.classes.size(); ++c) position[model.classes[c]] = c;
  std::vector<int> votes(model.classes.size());
  for (std::size_t t = 0; t < rows.rows; ++t) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& pair : model.pairs)
      ++votes[position[pair_decision(pair, rows.row(t)) >= 0.0 ? pair.first : pair.second]];
    out[t] = model.classes[static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin())];
  }
  return out;
}

}  // namespace awe
