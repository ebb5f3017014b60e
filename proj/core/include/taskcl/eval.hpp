#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "taskcl/contrastive.hpp"
#include "taskcl/graph.hpp"
#include "taskcl/matrix.hpp"
#include "taskcl/sampler.hpp"

namespace taskcl {

struct LogRegOptions {
  double l2 = 1e-4;
  double lr = 0.1;
  std::size_t epochs = 500;
  // Column standardization using training-set statistics.
  bool standardize = true;
};

// Multinomial logistic regression on (optionally standardized) embeddings.
struct Classifier {
  Matrix weights;  // h x C
  Matrix bias;     // 1 x C
  std::vector<double> mean;  // empty: features used as-is
  std::vector<double> scale;
  double l2 = 0.0;
  std::size_t epochs = 0;
  double final_grad_norm = 0.0;
  std::vector<double> objective_trace;

  std::size_t num_classes() const { return weights.cols(); }
};

// Mean cross-entropy + (l2/2)|W|^2 and its gradient, on raw features.
double logreg_objective(const Matrix& w, const Matrix& b, const Matrix& x, std::span<const int> y, double l2);
void logreg_gradient(const Matrix& w, const Matrix& b, const Matrix& x, std::span<const int> y, double l2,
                     Matrix& grad_w, Matrix& grad_b);

// Full-batch gradient descent from zero weights. num_classes = 0 infers it
// from the labels.
Classifier fit_logreg(const Matrix& z_train, std::span<const int> y_train, const LogRegOptions& opts = {},
                      int num_classes = 0);
std::vector<int> predict(const Classifier& clf, const Matrix& z);
double accuracy(const Classifier& clf, const Matrix& z_test, std::span<const int> y_test);

// Rank-based AUC with ties counted as 1/2.
double auc_from_scores(std::span<const double> positive, std::span<const double> negative);
// AUC of dot-product scores <z_u, z_v>.
double link_auc(const Matrix& z, const std::vector<Edge>& positive, const std::vector<Edge>& negative);

// Fraction of (u, positive) pairs with I_t = 1 under `truth`.
double positive_precision(const PositiveAssignment& assignment, const TaskSpec& truth, bool exclude_fallback = false);

// Rows of `z` selected by `ids`.
Matrix gather_rows(const Matrix& z, std::span<const NodeId> ids);

}  // namespace taskcl
