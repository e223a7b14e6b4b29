#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mslice/config.hpp"
#include "mslice/graph.hpp"
#include "mslice/ledger.hpp"
#include "mslice/matrix.hpp"

namespace mslice {

/// Consistency failures inside the timed model (fan-in overflow, deadlock,
/// firing before operands are ready).
class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fill cycles for a Register B load of `rows` output columns. Sub-arrays
/// fill in parallel, so at most one sub-array's worth of rows is paid.
double preload_fill_cycles(const SliceConfig& cfg, std::size_t rows);
/// Issue interval of a wave streaming `kc` elements per A row.
double wave_interval(const SliceConfig& cfg, std::size_t kc);
/// Cycles from the first wave to the last result of a tile: pipeline fill,
/// (m - 1) further injections and the diagonal drain through the rows.
double stream_cycles(const SliceConfig& cfg, std::size_t m, std::size_t kc, std::size_t rows);

struct RowResult {
  std::size_t row = 0;  // output row in C
  std::size_t col = 0;  // output column in C
  float value = 0.0f;
  bool final = false;   // the local k-slab is complete for this element
};

/// Register A / Register B model of one multiplier array. Array row r holds
/// output column n0 + rows - 1 - r, so the results of one wave lie on a
/// diagonal of C.
class SystolicState {
 public:
  explicit SystolicState(const SliceConfig& cfg);

  /// Loads a kc x nr tile of B whose top-left is (k0, n0). Returns the fill
  /// cycles. Throws SimError when the tile does not fit.
  double preload(const MatrixF& tile, std::size_t n0, bool last_chunk);
  /// Pushes one A row (kc values, output row `row`) into the top of the array
  /// and fires a wave; std::nullopt pushes a bubble while draining.
  struct Wave {
    std::vector<RowResult> results;
    double cycles = 0.0;
  };
  Wave stream_wave(std::optional<std::span<const float>> a_row, std::size_t row = 0);
  /// Waves needed to flush everything still inside the array.
  std::size_t in_flight() const;

  bool idle() const noexcept { return rows_ == 0; }
  std::size_t waves() const noexcept { return waves_; }
  std::size_t occupied_rows() const noexcept { return rows_; }
  float reg_b(std::size_t r, std::size_t c) const { return reg_b_(r, c); }

 private:
  struct Slot {
    bool valid = false;
    std::size_t row = 0;
    std::vector<float> values;
  };
  SliceConfig cfg_;
  MatrixF reg_b_;
  std::vector<Slot> reg_a_;  // one slot per array row
  std::size_t rows_ = 0, kc_ = 0, n0_ = 0;
  bool last_chunk_ = false;
  std::size_t waves_ = 0;
};

/// Partial product of a k-slab, accumulated chunk by chunk the way the
/// adder trees do it: each chunk of array_cols products is reduced first.
MatrixF slab_product(const MatrixF& a_slab, const MatrixF& b_slab, std::size_t chunk);

float apply_post_op(PostOp op, float value, std::size_t col, std::size_t cols);

struct AggregationSlot {
  std::size_t row = 0, col = 0;
  float value = 0.0f;
  std::size_t received = 0;
  std::size_t required = 1;
  PostOp post = PostOp::none;
  std::size_t out_cols = 1;  // used by lstm_gates to find the gate group
  bool finalized = false;
};

/// Adds one partial. Returns the post-processed value once the slot has all
/// `required` partials. Throws SimError on fan-in overflow.
std::optional<float> aggregate(AggregationSlot& slot, float partial);

/// Memory channel of one slice: a ledger in bytes per cycle.
class MemoryChannel : public BandwidthLedger {
 public:
  explicit MemoryChannel(double bytes_per_cycle = 1.0, double bucket_cycles = 64.0)
      : BandwidthLedger(bytes_per_cycle, bucket_cycles) {}
  double bytes() const noexcept { return total(); }
  double bytes_per_cycle() const noexcept { return rate(); }
};

}  // namespace mslice
