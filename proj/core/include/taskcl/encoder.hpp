#pragma once

#include <cstdint>
#include <filesystem>

#include "taskcl/csr.hpp"
#include "taskcl/matrix.hpp"

namespace taskcl {

struct EncoderDims {
  std::size_t input = 0;   // attribute dimension m
  std::size_t hidden = 256;
  std::size_t output = 128;
};

// Two-layer GCN: Z = A * ReLU(A X W1 + b1) * W2 + b2.
struct EncoderParams {
  Matrix w1;  // m x h1
  Matrix b1;  // 1 x h1
  Matrix w2;  // h1 x h
  Matrix b2;  // 1 x h

  EncoderDims dims() const { return {w1.rows(), w1.cols(), w2.cols()}; }
  bool all_finite() const;
  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

using EncoderGrads = EncoderParams;

// Glorot-uniform weights, zero biases.
EncoderParams init_params(const EncoderDims& dims, std::uint64_t seed);

struct EmbeddingMatrix {
  Matrix z;
  bool normalized = false;
};

// Intermediate activations kept for the backward pass.
struct ForwardCache {
  Matrix ax;         // A X
  Matrix pre1;       // A X W1 + b1
  Matrix agg1;       // A ReLU(pre1)
  Matrix raw;        // agg1 W2 + b2, before optional normalization
  Matrix row_norms;  // n x 1, only when normalized
};

// A X is independent of the parameters; pass it in to avoid recomputing it
// every epoch.
Matrix propagate_input(const CsrMatrix& a_hat, const Matrix& x);

EmbeddingMatrix gcn_forward(const CsrMatrix& a_hat, const Matrix& x, const EncoderParams& params,
                            bool normalize = false, ForwardCache* cache = nullptr);
EmbeddingMatrix gcn_forward_propagated(const CsrMatrix& a_hat, const Matrix& ax, const EncoderParams& params,
                                       bool normalize = false, ForwardCache* cache = nullptr);

// Exact parameter gradients of the forward map for upstream gradient dZ.
EncoderGrads gcn_backward(const CsrMatrix& a_hat, const EncoderParams& params, const ForwardCache& cache,
                          const Matrix& dz, bool normalize = false);
// Convenience overload that reruns the forward pass.
EncoderGrads gcn_backward(const CsrMatrix& a_hat, const Matrix& x, const EncoderParams& params, const Matrix& dz,
                          bool normalize = false);

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  EncoderParams m;
  EncoderParams v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const EncoderParams& p);
};

// Bias-corrected Adam update. Throws NumericError on non-finite gradients.
void adam_step(EncoderParams& params, const EncoderGrads& grads, AdamState& state, const AdamOptions& opts);

void save_params(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_params(const std::filesystem::path& path);

}  // namespace taskcl
