#include "mslice/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mslice::oracle {

namespace {

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw std::invalid_argument(std::string("shape mismatch for ") + what + ": expected " + std::to_string(rows) +
                                "x" + std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: dimension mismatch (" + std::to_string(a.cols()) +
                                " != " + std::to_string(b.rows()) + ")");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("hconcat: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (std::size_t c = 0; c < b.cols(); ++c) out(r, a.cols() + c) = b(r, c);
  }
  return out;
}

Matrix columns(const Matrix& m, std::size_t begin, std::size_t end) {
  if (begin > end || end > m.cols()) throw std::invalid_argument("columns: range out of bounds");
  Matrix out(m.rows(), end - begin);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = m(r, c);
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LstmParams::LstmParams(std::size_t h, Matrix w) : hidden(h), weight(std::move(w)) {
  require_shape(weight, 2 * h, 4 * h, "LSTM weight");
}

Matrix activate_gates(const Matrix& z, std::size_t hidden) {
  require_shape(z, z.rows(), 4 * hidden, "gate pre-activation");
  Matrix g(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c)
      g(r, c) = (c / hidden == 2) ? std::tanh(z(r, c)) : sigmoid(z(r, c));
  return g;
}

LstmForward lstm_cell(const LstmParams& p, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev) {
  const std::size_t H = p.hidden;
  const std::size_t batch = x.rows();
  require_shape(x, batch, H, "x");
  require_shape(h_prev, batch, H, "h_prev");
  require_shape(c_prev, batch, H, "c_prev");
  require_shape(p.weight, 2 * H, 4 * H, "weight");

  LstmForward out;
  out.z = matmul(hconcat(x, h_prev), p.weight);
  Matrix g = activate_gates(out.z, H);
  out.c = Matrix(batch, H);
  out.h = Matrix(batch, H);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t u = 0; u < H; ++u) {
      double i = g(r, u), f = g(r, H + u), cand = g(r, 2 * H + u), o = g(r, 3 * H + u);
      double c = f * c_prev(r, u) + i * cand;
      out.c(r, u) = c;
      out.h(r, u) = o * std::tanh(c);
    }
  return out;
}

LstmCache make_cache(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, const LstmForward& fwd) {
  return {x, h_prev, c_prev, fwd.z, fwd.c};
}

LstmGradients lstm_backward(const LstmParams& p, const LstmCache& cache, const Matrix& dh, const Matrix& dc) {
  const std::size_t H = p.hidden;
  const std::size_t batch = cache.x.rows();
  require_shape(cache.x, batch, H, "cached x");
  require_shape(cache.h_prev, batch, H, "cached h_prev");
  require_shape(cache.c_prev, batch, H, "cached c_prev");
  require_shape(cache.z, batch, 4 * H, "cached z");
  require_shape(cache.c, batch, H, "cached c");
  require_shape(dh, batch, H, "dh");
  require_shape(dc, batch, H, "dc");

  Matrix g = activate_gates(cache.z, H);
  LstmGradients out;
  out.dz = Matrix(batch, 4 * H);
  out.dc_prev = Matrix(batch, H);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t u = 0; u < H; ++u) {
      double i = g(r, u), f = g(r, H + u), cand = g(r, 2 * H + u), o = g(r, 3 * H + u);
      double tc = std::tanh(cache.c(r, u));
      double dct = dc(r, u) + dh(r, u) * o * (1.0 - tc * tc);
      out.dz(r, u) = dct * cand * i * (1.0 - i);
      out.dz(r, H + u) = dct * cache.c_prev(r, u) * f * (1.0 - f);
      out.dz(r, 2 * H + u) = dct * i * (1.0 - cand * cand);
      out.dz(r, 3 * H + u) = dh(r, u) * tc * o * (1.0 - o);
      out.dc_prev(r, u) = dct * f;
    }
  Matrix input = hconcat(cache.x, cache.h_prev);
  out.dw = matmul(input.transposed(), out.dz);
  Matrix dinput = matmul(out.dz, p.weight.transposed());
  out.dx = columns(dinput, 0, H);
  out.dh_prev = columns(dinput, H, 2 * H);
  return out;
}

Matrix sgd_update(const Matrix& w, const Matrix& grad, double eta) {
  if (!w.same_shape(grad)) throw std::invalid_argument("sgd_update: shape mismatch");
  if (!(eta > 0)) throw std::invalid_argument("sgd_update: eta must be positive");
  Matrix out = w;
  for (std::size_t i = 0; i < w.size(); ++i) out.data()[i] -= eta * grad.data()[i];
  return out;
}

}  // namespace mslice::oracle
