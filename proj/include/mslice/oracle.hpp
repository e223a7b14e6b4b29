#pragma once

#include "mslice/matrix.hpp"

namespace mslice::oracle {

/// Dense product with 64-bit accumulation in plain i-j-k order.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Horizontal concatenation [a | b].
Matrix hconcat(const Matrix& a, const Matrix& b);
/// Columns [begin, end) of m.
Matrix columns(const Matrix& m, std::size_t begin, std::size_t end);

double sigmoid(double x);

/// LSTM weights. Storage is 2H x 4H; the 4H axis holds the gate groups in
/// the order (input, forget, cell candidate, output).
struct LstmParams {
  std::size_t hidden = 0;
  Matrix weight;

  LstmParams() = default;
  LstmParams(std::size_t h, Matrix w);
};

struct LstmForward {
  Matrix h;  // batch x H
  Matrix c;  // batch x H
  Matrix z;  // batch x 4H, pre-activation
};

/// Tensors kept from the forward pass for the backward pass.
struct LstmCache {
  Matrix x, h_prev, c_prev;
  Matrix z, c;
};

LstmForward lstm_cell(const LstmParams& params, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev);
LstmCache make_cache(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, const LstmForward& fwd);

/// Activated gates (sigmoid i/f/o, tanh g) from a pre-activation z.
Matrix activate_gates(const Matrix& z, std::size_t hidden);

struct LstmGradients {
  Matrix dw;      // 2H x 4H
  Matrix dx;      // batch x H
  Matrix dh_prev; // batch x H
  Matrix dc_prev; // batch x H
  Matrix dz;      // batch x 4H, gradient w.r.t. pre-activation
};

LstmGradients lstm_backward(const LstmParams& params, const LstmCache& cache, const Matrix& dh, const Matrix& dc);

/// w - eta * grad.
Matrix sgd_update(const Matrix& w, const Matrix& grad, double eta);

}  // namespace mslice::oracle
