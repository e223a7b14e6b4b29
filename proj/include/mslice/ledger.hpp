#pragma once

#include <cstddef>
#include <vector>

namespace mslice {

/// Bandwidth ledger of one channel (memory port, mesh link). Time is split
/// into buckets that each carry at most bucket * rate units; a transfer
/// takes the earliest free capacity from its start time on, so work that is
/// simulated out of time order still fills earlier idle gaps.
class BandwidthLedger {
 public:
  explicit BandwidthLedger(double rate = 1.0, double bucket_cycles = 64.0);
  /// Returns the cycle at which the last unit has moved.
  double transfer(double start, double amount);
  double total() const noexcept { return total_; }
  double rate() const noexcept { return rate_; }

 private:
  void grow(std::size_t bucket);
  /// First bucket at or after `b` that still has capacity.
  std::size_t first_open(std::size_t b);

  double rate_, bucket_;
  std::vector<double> used_;
  std::vector<std::size_t> next_;  // skip pointers over full buckets
  double total_ = 0.0;
};

}  // namespace mslice
