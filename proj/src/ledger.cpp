#include "mslice/ledger.hpp"

#include <algorithm>
#include <numeric>

namespace mslice {

BandwidthLedger::BandwidthLedger(double rate, double bucket_cycles) : rate_(rate), bucket_(bucket_cycles) {}

void BandwidthLedger::grow(std::size_t bucket) {
  if (bucket < used_.size()) return;
  std::size_t old = used_.size();
  std::size_t size = std::max(bucket + 1, old + old / 2);
  used_.resize(size, 0.0);
  next_.resize(size);
  std::iota(next_.begin() + static_cast<std::ptrdiff_t>(old), next_.end(), old);
}

std::size_t BandwidthLedger::first_open(std::size_t b) {
  grow(b);
  std::size_t r = b;
  while (next_[r] != r) {
    r = next_[r];
    grow(r);
  }
  while (next_[b] != r) {
    std::size_t n = next_[b];
    next_[b] = r;
    b = n;
  }
  return r;
}

double BandwidthLedger::transfer(double start, double amount) {
  if (amount <= 0.0) return start;
  total_ += amount;
  const double cap = bucket_ * rate_;
  auto b = static_cast<std::size_t>(start / bucket_);
  double t = start;
  double remaining = amount;
  for (;;) {
    std::size_t open = first_open(b);
    if (open != b) {
      b = open;
      t = static_cast<double>(b) * bucket_;
    }
    double window = (static_cast<double>(b + 1) * bucket_ - t) * rate_;
    double avail = std::min(cap - used_[b], window);
    if (avail > 0.0) {
      double x = std::min(avail, remaining);
      used_[b] += x;
      remaining -= x;
      if (used_[b] >= cap * (1.0 - 1e-12)) next_[b] = b + 1;
      if (remaining <= 1e-9 * amount) {
        double by_rate = t + x / rate_;
        double by_fill = static_cast<double>(b) * bucket_ + used_[b] / rate_;
        return std::max(by_rate, by_fill);
      }
    }
    ++b;
    t = static_cast<double>(b) * bucket_;
  }
}

}  // namespace mslice
