#include "mslice/slice_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mslice {

double preload_fill_cycles(const SliceConfig& cfg, std::size_t rows) {
  if (rows == 0) return 0.0;
  std::size_t per_sub = std::min(rows, cfg.array_rows);
  return std::ceil(static_cast<double>(cfg.preload_cycles) * static_cast<double>(per_sub) /
                   static_cast<double>(cfg.array_rows));
}

double wave_interval(const SliceConfig& cfg, std::size_t kc) {
  double mem = static_cast<double>(kc * cfg.element_bytes()) / cfg.bytes_per_cycle();
  return std::max(static_cast<double>(cfg.mult_latency), mem);
}

double stream_cycles(const SliceConfig& cfg, std::size_t m, std::size_t kc, std::size_t rows) {
  if (m == 0 || rows == 0) return 0.0;
  std::size_t per_sub = std::min(rows, cfg.array_rows);
  return static_cast<double>(cfg.mult_latency + cfg.adder_tree_latency) +
         static_cast<double>(m - 1) * wave_interval(cfg, kc) +
         static_cast<double>(per_sub - 1) * static_cast<double>(cfg.mult_latency);
}

SystolicState::SystolicState(const SliceConfig& cfg)
    : cfg_(cfg), reg_b_(cfg.effective_rows(), cfg.array_cols), reg_a_(cfg.array_rows) {}

double SystolicState::preload(const MatrixF& tile, std::size_t n0, bool last_chunk) {
  if (tile.rows() > cfg_.array_cols || tile.cols() > cfg_.effective_rows())
    throw SimError("Register B tile " + std::to_string(tile.rows()) + "x" + std::to_string(tile.cols()) +
                   " exceeds the multiplier array");
  for (auto& s : reg_a_) s.valid = false;
  reg_b_ = MatrixF(cfg_.effective_rows(), cfg_.array_cols);
  rows_ = tile.cols();
  kc_ = tile.rows();
  n0_ = n0;
  last_chunk_ = last_chunk;
  waves_ = 0;
  const std::size_t ar = cfg_.array_rows;
  for (std::size_t base = 0; base < rows_; base += ar) {
    std::size_t sub = std::min(ar, rows_ - base);
    for (std::size_t r = 0; r < sub; ++r)
      for (std::size_t c = 0; c < kc_; ++c) reg_b_(base + r, c) = tile(c, base + sub - 1 - r);
  }
  return preload_fill_cycles(cfg_, rows_);
}

SystolicState::Wave SystolicState::stream_wave(std::optional<std::span<const float>> a_row, std::size_t row) {
  if (rows_ == 0) throw SimError("wave fired with an empty Register B");
  if (a_row && a_row->size() != kc_)
    throw SimError("wave fired before all operands of the row were present");
  for (std::size_t d = reg_a_.size() - 1; d > 0; --d) reg_a_[d] = std::move(reg_a_[d - 1]);
  reg_a_[0] = Slot{};
  if (a_row) reg_a_[0] = Slot{true, row, std::vector<float>(a_row->begin(), a_row->end())};

  Wave w;
  w.cycles = waves_ == 0 ? static_cast<double>(cfg_.mult_latency + cfg_.adder_tree_latency)
                         : wave_interval(cfg_, kc_);
  ++waves_;
  const std::size_t ar = cfg_.array_rows;
  for (std::size_t base = 0; base < rows_; base += ar) {
    std::size_t sub = std::min(ar, rows_ - base);
    for (std::size_t r = sub; r-- > 0;) {
      const auto& slot = reg_a_[r];
      if (!slot.valid) continue;
      float acc = 0.0f;
      for (std::size_t c = 0; c < kc_; ++c) acc += slot.values[c] * reg_b_(base + r, c);
      w.results.push_back({slot.row, n0_ + base + sub - 1 - r, acc, last_chunk_});
    }
  }
  return w;
}

std::size_t SystolicState::in_flight() const {
  std::size_t depth = std::min(rows_, cfg_.array_rows);
  for (std::size_t d = 0; d < depth; ++d)
    if (reg_a_[d].valid) return depth - 1 - d;
  return 0;
}

MatrixF slab_product(const MatrixF& a, const MatrixF& b, std::size_t chunk) {
  if (a.cols() != b.rows()) throw SimError("slab product: dimension mismatch");
  if (chunk == 0) chunk = 1;
  const std::size_t m = a.rows(), n = b.cols(), k = a.cols();
  MatrixF out(m, n);
  std::vector<float> tmp(n);
  for (std::size_t k0 = 0; k0 < k; k0 += chunk) {
    const std::size_t k1 = std::min(k, k0 + chunk);
    for (std::size_t i = 0; i < m; ++i) {
      std::fill(tmp.begin(), tmp.end(), 0.0f);
      for (std::size_t kk = k0; kk < k1; ++kk) {
        const float av = a(i, kk);
        const float* brow = &b(kk, 0);
        for (std::size_t j = 0; j < n; ++j) tmp[j] += av * brow[j];
      }
      float* orow = &out(i, 0);
      for (std::size_t j = 0; j < n; ++j) orow[j] += tmp[j];
    }
  }
  return out;
}

float apply_post_op(PostOp op, float v, std::size_t col, std::size_t cols) {
  switch (op) {
    case PostOp::none: return v;
    case PostOp::sigmoid: return 1.0f / (1.0f + std::exp(-v));
    case PostOp::tanh: return std::tanh(v);
    case PostOp::lstm_gates: {
      std::size_t hidden = cols / 4;
      if (hidden > 0 && col / hidden == 2) return std::tanh(v);
      return 1.0f / (1.0f + std::exp(-v));
    }
  }
  return v;
}

std::optional<float> aggregate(AggregationSlot& slot, float partial) {
  if (slot.finalized || slot.received >= slot.required)
    throw SimError("fan-in overflow at output (" + std::to_string(slot.row) + "," + std::to_string(slot.col) +
                   "): more than " + std::to_string(slot.required) + " partials");
  slot.value += partial;
  ++slot.received;
  if (slot.received < slot.required) return std::nullopt;
  slot.finalized = true;
  slot.value = apply_post_op(slot.post, slot.value, slot.col, slot.out_cols);
  return slot.value;
}

}  // namespace mslice
