#include "taskcl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "taskcl/error.hpp"

namespace taskcl {

namespace {

// Row-wise softmax probabilities of x W + b.
Matrix softmax_probs(const Matrix& w, const Matrix& b, const Matrix& x) {
  Matrix logits = matmul(x, w);
  add_row_vector(logits, b);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    const double m = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double& v : r) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : r) v /= s;
  }
  return logits;
}

void standardize_in_place(Matrix& x, const std::vector<double>& mean, const std::vector<double>& scale) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean[j]) / scale[j];
  }
}

}  // namespace

double logreg_objective(const Matrix& w, const Matrix& b, const Matrix& x, std::span<const int> y, double l2) {
  Matrix logits = matmul(x, w);
  add_row_vector(logits, b);
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    const double m = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double v : r) s += std::exp(v - m);
    loss += m + std::log(s) - r[static_cast<std::size_t>(y[i])];
  }
  double reg = 0.0;
  for (double v : w.data()) reg += v * v;
  return loss / static_cast<double>(logits.rows()) + 0.5 * l2 * reg;
}

void logreg_gradient(const Matrix& w, const Matrix& b, const Matrix& x, std::span<const int> y, double l2,
                     Matrix& grad_w, Matrix& grad_b) {
  Matrix p = softmax_probs(w, b, x);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    p(i, static_cast<std::size_t>(y[i])) -= 1.0;
    for (double& v : p.row(i)) v *= inv_n;
  }
  grad_w = matmul_at_b(x, p);
  for (std::size_t k = 0; k < grad_w.size(); ++k) grad_w.data()[k] += l2 * w.data()[k];
  grad_b = column_sums(p);
}

Classifier fit_logreg(const Matrix& z_train, std::span<const int> y_train, const LogRegOptions& opts,
                      int num_classes) {
  if (z_train.rows() != y_train.size()) throw DataError("fit_logreg: row/label count mismatch");
  if (z_train.rows() == 0) throw DataError("fit_logreg: empty training set");
  int max_label = 0;
  for (int c : y_train) {
    if (c < 0) throw DataError("fit_logreg: negative label");
    max_label = std::max(max_label, c);
  }
  const int C = num_classes > 0 ? num_classes : max_label + 1;
  if (max_label >= C) throw DataError("fit_logreg: label exceeds class count");
  if (std::all_of(y_train.begin(), y_train.end(), [&](int c) { return c == y_train[0]; }))
    throw DataError("fit_logreg: single-class training set");

  const std::size_t h = z_train.cols();
  Classifier clf;
  clf.l2 = opts.l2;
  clf.epochs = opts.epochs;
  clf.mean.assign(h, 0.0);
  clf.scale.assign(h, 1.0);
  Matrix x = z_train;
  if (opts.standardize) {
    const double n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < h; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, j);
      clf.mean[j] = s / n;
      double v = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) v += (x(i, j) - clf.mean[j]) * (x(i, j) - clf.mean[j]);
      const double sd = std::sqrt(v / n);
      clf.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    standardize_in_place(x, clf.mean, clf.scale);
  }
  clf.weights = Matrix(h, static_cast<std::size_t>(C));
  clf.bias = Matrix(1, static_cast<std::size_t>(C));
  Matrix gw, gb;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    logreg_gradient(clf.weights, clf.bias, x, y_train, opts.l2, gw, gb);
    for (std::size_t k = 0; k < gw.size(); ++k) clf.weights.data()[k] -= opts.lr * gw.data()[k];
    for (std::size_t k = 0; k < gb.size(); ++k) clf.bias.data()[k] -= opts.lr * gb.data()[k];
    clf.objective_trace.push_back(logreg_objective(clf.weights, clf.bias, x, y_train, opts.l2));
  }
  logreg_gradient(clf.weights, clf.bias, x, y_train, opts.l2, gw, gb);
  double g2 = 0.0;
  for (double v : gw.data()) g2 += v * v;
  for (double v : gb.data()) g2 += v * v;
  clf.final_grad_norm = std::sqrt(g2);
  if (!clf.weights.all_finite()) throw NumericError("fit_logreg: diverged");
  return clf;
}

std::vector<int> predict(const Classifier& clf, const Matrix& z) {
  if (z.cols() != clf.weights.rows()) throw DataError("predict: embedding dimension mismatch");
  Matrix x = z;
  if (!clf.mean.empty()) standardize_in_place(x, clf.mean, clf.scale);
  Matrix logits = matmul(x, clf.weights);
  add_row_vector(logits, clf.bias);
  std::vector<int> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = logits.row(i);
    // max_element returns the first maximum: ties go to the lowest class id.
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double accuracy(const Classifier& clf, const Matrix& z_test, std::span<const int> y_test) {
  if (z_test.rows() == 0) throw DataError("accuracy: empty test set");
  if (z_test.rows() != y_test.size()) throw DataError("accuracy: row/label count mismatch");
  const auto pred = predict(clf, z_test);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == y_test[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double auc_from_scores(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw DataError("auc: empty positive or negative list");
  std::vector<std::pair<double, bool>> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.emplace_back(s, true);
  for (double s : negative) all.emplace_back(s, false);
  for (const auto& [s, _] : all)
    if (std::isnan(s)) throw NumericError("auc: NaN score");
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // Mann-Whitney U with midranks: each tie group contributes
  // (#neg below) + 0.5 * (#neg in group) per positive.
  double u = 0.0;
  double neg_below = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    double pos_in = 0.0, neg_in = 0.0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? pos_in : neg_in) += 1.0;
      ++j;
    }
    u += pos_in * (neg_below + 0.5 * neg_in);
    neg_below += neg_in;
    i = j;
  }
  return u / (static_cast<double>(positive.size()) * static_cast<double>(negative.size()));
}

double link_auc(const Matrix& z, const std::vector<Edge>& positive, const std::vector<Edge>& negative) {
  std::vector<double> ps, ns;
  for (auto [u, v] : positive) ps.push_back(dot(z.row(u), z.row(v)));
  for (auto [u, v] : negative) ns.push_back(dot(z.row(u), z.row(v)));
  return auc_from_scores(ps, ns);
}

double positive_precision(const PositiveAssignment& assignment, const TaskSpec& truth, bool exclude_fallback) {
  std::size_t total = 0, hit = 0;
  for (NodeId u = 0; u < assignment.num_nodes(); ++u)
    for (std::size_t b = 0; b < assignment.positives[u].size(); ++b) {
      if (exclude_fallback && assignment.provenance[u][b] == kTagFallback) continue;
      ++total;
      hit += truth.indicator(u, assignment.positives[u][b]);
    }
  if (total == 0) throw DataError("positive_precision: no pairs to score");
  return static_cast<double>(hit) / static_cast<double>(total);
}

Matrix gather_rows(const Matrix& z, std::span<const NodeId> ids) {
  Matrix out(ids.size(), z.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) std::copy(z.row(ids[i]).begin(), z.row(ids[i]).end(), out.row(i).begin());
  return out;
}

}  // namespace taskcl
