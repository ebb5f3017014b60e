#include "taskcl/encoder.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "taskcl/error.hpp"
#include "taskcl/io.hpp"
#include "taskcl/rng.hpp"

namespace taskcl {

namespace {

template <typename F>
void for_each_tensor(EncoderParams& p, F&& f) {
  f(p.w1);
  f(p.b1);
  f(p.w2);
  f(p.b2);
}

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (double& x : w.data()) x = rng.uniform(-bound, bound);
  return w;
}

void check_shapes(const CsrMatrix& a_hat, const Matrix& ax, const EncoderParams& p) {
  if (a_hat.rows() != a_hat.cols() || a_hat.rows() != ax.rows())
    throw DataError("gcn: adjacency/attribute shape mismatch");
  if (ax.cols() != p.w1.rows() || p.b1.cols() != p.w1.cols() || p.w2.rows() != p.w1.cols() ||
      p.b2.cols() != p.w2.cols() || p.b1.rows() != 1 || p.b2.rows() != 1)
    throw DataError("gcn: parameter shape mismatch");
}

}  // namespace

bool EncoderParams::all_finite() const {
  return w1.all_finite() && b1.all_finite() && w2.all_finite() && b2.all_finite();
}

EncoderParams init_params(const EncoderDims& dims, std::uint64_t seed) {
  if (dims.input == 0 || dims.hidden == 0 || dims.output == 0) throw ConfigError("init_params: dims must be positive");
  Rng rng(seed);
  EncoderParams p;
  p.w1 = glorot(dims.input, dims.hidden, rng);
  p.b1 = Matrix(1, dims.hidden);
  p.w2 = glorot(dims.hidden, dims.output, rng);
  p.b2 = Matrix(1, dims.output);
  return p;
}

Matrix propagate_input(const CsrMatrix& a_hat, const Matrix& x) { return spmm(a_hat, x); }

EmbeddingMatrix gcn_forward(const CsrMatrix& a_hat, const Matrix& x, const EncoderParams& params, bool normalize,
                            ForwardCache* cache) {
  return gcn_forward_propagated(a_hat, propagate_input(a_hat, x), params, normalize, cache);
}

EmbeddingMatrix gcn_forward_propagated(const CsrMatrix& a_hat, const Matrix& ax, const EncoderParams& params,
                                       bool normalize, ForwardCache* cache) {
  check_shapes(a_hat, ax, params);
  Matrix pre1 = matmul(ax, params.w1);
  add_row_vector(pre1, params.b1);
  Matrix act = pre1;
  for (double& v : act.data()) v = v > 0.0 ? v : 0.0;
  Matrix agg1 = spmm(a_hat, act);
  Matrix raw = matmul(agg1, params.w2);
  add_row_vector(raw, params.b2);

  EmbeddingMatrix out{raw, normalize};
  Matrix norms;
  if (normalize) {
    norms = Matrix(raw.rows(), 1);
    for (std::size_t i = 0; i < raw.rows(); ++i) norms(i, 0) = l2_norm(raw.row(i));
    normalize_rows_l2(out.z);
  }
  if (cache) {
    cache->ax = ax;
    cache->pre1 = std::move(pre1);
    cache->agg1 = std::move(agg1);
    cache->raw = std::move(raw);
    cache->row_norms = std::move(norms);
  }
  return out;
}

EncoderGrads gcn_backward(const CsrMatrix& a_hat, const EncoderParams& params, const ForwardCache& cache,
                          const Matrix& dz, bool normalize) {
  if (dz.rows() != cache.raw.rows() || dz.cols() != cache.raw.cols()) throw DataError("gcn_backward: dZ shape mismatch");
  Matrix draw = dz;
  if (normalize) {
    // z = r / |r|  =>  dr = (dz - z (z . dz)) / |r|; zero rows pass nothing.
    for (std::size_t i = 0; i < draw.rows(); ++i) {
      const double norm = cache.row_norms(i, 0);
      auto row = draw.row(i);
      if (norm == 0.0) {
        for (double& v : row) v = 0.0;
        continue;
      }
      auto r = cache.raw.row(i);
      double proj = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) proj += r[j] / norm * row[j];
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - r[j] / norm * proj) / norm;
    }
  }
  EncoderGrads g;
  g.w2 = matmul_at_b(cache.agg1, draw);
  g.b2 = column_sums(draw);
  Matrix dagg1 = matmul_a_bt(draw, params.w2);
  Matrix dpre1 = spmm_transposed(a_hat, dagg1);
  const auto& pre = cache.pre1.data();
  auto& d = dpre1.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!(pre[i] > 0.0)) d[i] = 0.0;
  g.w1 = matmul_at_b(cache.ax, dpre1);
  g.b1 = column_sums(dpre1);
  return g;
}

EncoderGrads gcn_backward(const CsrMatrix& a_hat, const Matrix& x, const EncoderParams& params, const Matrix& dz,
                          bool normalize) {
  ForwardCache cache;
  gcn_forward(a_hat, x, params, normalize, &cache);
  return gcn_backward(a_hat, params, cache, dz, normalize);
}

AdamState AdamState::zeros_like(const EncoderParams& p) {
  AdamState s;
  s.m = EncoderParams{Matrix(p.w1.rows(), p.w1.cols()), Matrix(p.b1.rows(), p.b1.cols()),
                      Matrix(p.w2.rows(), p.w2.cols()), Matrix(p.b2.rows(), p.b2.cols())};
  s.v = s.m;
  return s;
}

void adam_step(EncoderParams& params, const EncoderGrads& grads, AdamState& state, const AdamOptions& opts) {
  if (!grads.all_finite()) throw NumericError("gradient blow-up");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  auto update = [&](Matrix& p, const Matrix& g, Matrix& m, Matrix& v) {
    if (p.size() != g.size() || p.size() != m.size()) throw DataError("adam_step: shape mismatch");
    auto& pd = p.data();
    const auto& gd = g.data();
    auto& md = m.data();
    auto& vd = v.data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      md[i] = opts.beta1 * md[i] + (1.0 - opts.beta1) * gd[i];
      vd[i] = opts.beta2 * vd[i] + (1.0 - opts.beta2) * gd[i] * gd[i];
      pd[i] -= opts.lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + opts.eps);
    }
  };
  update(params.w1, grads.w1, state.m.w1, state.v.w1);
  update(params.b1, grads.b1, state.m.b1, state.v.b1);
  update(params.w2, grads.w2, state.m.w2, state.v.w2);
  update(params.b2, grads.b2, state.m.b2, state.v.b2);
}

void save_params(const EncoderParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  nlohmann::json index = {{"format", "taskcl-gcn"}, {"version", 1}, {"matrices", {"w1", "b1", "w2", "b2"}}};
  os << index.dump() << '\n';
  EncoderParams copy = params;
  for_each_tensor(copy, [&](Matrix& m) { io::write_tclm(os, m); });
  if (!os) throw DataError("write failed: " + path.string());
}

EncoderParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  std::string line;
  std::getline(is, line);
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw DataError("corrupt checkpoint: " + path.string());
  }
  if (index.value("format", "") != "taskcl-gcn" || index.value("version", 0) != 1)
    throw DataError("unsupported checkpoint: " + path.string());
  EncoderParams p;
  for_each_tensor(p, [&](Matrix& m) { m = io::read_tclm(is, path.string()); });
  return p;
}

}  // namespace taskcl
