#include <doctest.h>

#include <random>

#include "mslice/ledger.hpp"
#include "mslice/oracle.hpp"
#include "mslice/slice_engine.hpp"

using namespace mslice;

namespace {

MatrixF random_f(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  MatrixF m(r, c);
  for (auto& v : m.data()) v = d(rng);
  return m;
}

// Streams every row of A through a preloaded B tile and collects C.
MatrixF run_tile(const SliceConfig& cfg, const MatrixF& a, const MatrixF& b) {
  SystolicState s(cfg);
  s.preload(b, 0, true);
  MatrixF c(a.rows(), b.cols());
  auto take = [&](const SystolicState::Wave& w) {
    for (const auto& r : w.results) c(r.row, r.col) = r.value;
  };
  for (std::size_t i = 0; i < a.rows(); ++i) take(s.stream_wave(a.row(i), i));
  while (s.in_flight() > 0) take(s.stream_wave(std::nullopt));
  return c;
}

}  // namespace

TEST_CASE("preload fill cycles") {
  SliceConfig cfg;
  CHECK(preload_fill_cycles(cfg, 256) == 256);
  CHECK(preload_fill_cycles(cfg, 10) == 10);
  CHECK(preload_fill_cycles(cfg, 0) == 0);
  cfg.compute_scale = 2.0;
  // Sub-arrays fill side by side.
  CHECK(preload_fill_cycles(cfg, 512) == 256);
}

TEST_CASE("wave interval") {
  SliceConfig cfg;
  CHECK(wave_interval(cfg, 8) == 3);  // compute-bound at the default memory
  cfg.clock_ghz = 1.0;
  cfg.memory.per_slice_bandwidth_gbps = 16.0 / 6.0;
  CHECK(wave_interval(cfg, 8) == doctest::Approx(6.0));

  SliceConfig d;
  // fill + (m - 1) intervals + diagonal drain
  CHECK(stream_cycles(d, 4, 8, 10) == 3 + 3 + 3 * 3 + 9 * 3);
  CHECK(stream_cycles(d, 0, 8, 10) == 0);
}

TEST_CASE("2x2 toy reproduces the oracle") {
  SliceConfig cfg;
  cfg.array_rows = 2;
  cfg.array_cols = 2;
  MatrixF a{{1, 2}, {3, 4}};
  MatrixF b{{5, 6}, {7, 8}};
  auto ref = oracle::matmul(Matrix::from(a), Matrix::from(b));
  CHECK(run_tile(cfg, a, b) == MatrixF::from(ref));
}

TEST_CASE("systolic tile matches the oracle") {
  std::mt19937_64 rng(21);
  SliceConfig cfg;
  cfg.array_rows = 16;
  for (double scale : {1.0, 2.0}) {
    cfg.compute_scale = scale;
    for (std::size_t kc : {1u, 5u, 8u})
      for (std::size_t nr : {1u, 7u, 16u, 29u}) {
        if (nr > cfg.effective_rows()) continue;
        MatrixF a = random_f(11, kc, rng), b = random_f(kc, nr, rng);
        auto ref = oracle::matmul(Matrix::from(a), Matrix::from(b));
        CHECK(relative_error(run_tile(cfg, a, b), ref) < 1e-5);
      }
  }
}

TEST_CASE("wave results lie on a diagonal") {
  SliceConfig cfg;
  cfg.array_rows = 4;
  SystolicState s(cfg);
  s.preload(MatrixF(8, 4, 1.0f), 0, true);
  std::vector<float> row(8, 1.0f);
  s.stream_wave(std::span<const float>(row), 0);
  s.stream_wave(std::span<const float>(row), 1);
  auto w = s.stream_wave(std::span<const float>(row), 2);
  REQUIRE(w.results.size() == 3);
  // Deeper array rows hold older A rows and lower output columns.
  for (const auto& r : w.results) CHECK(r.col - r.row == 1);
}

TEST_CASE("systolic errors") {
  SliceConfig cfg;
  SystolicState s(cfg);
  CHECK_THROWS_AS(s.stream_wave(std::nullopt), SimError);
  CHECK_THROWS_AS(s.preload(MatrixF(9, 4), 0, true), SimError);
  s.preload(MatrixF(4, 4), 0, true);
  std::vector<float> short_row(3);
  CHECK_THROWS_AS(s.stream_wave(std::span<const float>(short_row), 0), SimError);
}

TEST_CASE("all-zero A gives zero results") {
  SliceConfig cfg;
  cfg.array_rows = 8;
  std::mt19937_64 rng(2);
  auto c = run_tile(cfg, MatrixF(5, 8), random_f(8, 8, rng));
  CHECK(c == MatrixF(5, 8));
}

TEST_CASE("slab product") {
  std::mt19937_64 rng(4);
  MatrixF a = random_f(6, 19, rng), b = random_f(19, 5, rng);
  auto ref = oracle::matmul(Matrix::from(a), Matrix::from(b));
  for (std::size_t chunk : {0u, 1u, 8u, 32u}) CHECK(relative_error(slab_product(a, b, chunk), ref) < 1e-5);
  CHECK_THROWS_AS(slab_product(a, a, 8), SimError);
}

TEST_CASE("aggregation slot") {
  SUBCASE("fan-in 2 sum") {
    AggregationSlot s;
    s.required = 2;
    CHECK_FALSE(aggregate(s, 1.5f).has_value());
    CHECK(aggregate(s, 2.5f) == 4.0f);
    CHECK_THROWS_AS(aggregate(s, 1.0f), SimError);
  }
  SUBCASE("fan-in 1 finalizes immediately") {
    AggregationSlot s;
    CHECK(aggregate(s, 3.0f) == 3.0f);
  }
  SUBCASE("sigmoid of zero") {
    AggregationSlot s;
    s.required = 2;
    s.post = PostOp::sigmoid;
    aggregate(s, 1.0f);
    CHECK(aggregate(s, -1.0f) == 0.5f);
  }
  SUBCASE("lstm gate groups") {
    // Column 2 of 4 is the cell-candidate group: tanh.
    CHECK(apply_post_op(PostOp::lstm_gates, 0.0f, 2, 4) == 0.0f);
    CHECK(apply_post_op(PostOp::lstm_gates, 0.0f, 1, 4) == 0.5f);
  }
}

TEST_CASE("bandwidth ledger") {
  BandwidthLedger l(2.0, 4.0);
  CHECK(l.transfer(0, 8) == doctest::Approx(4.0));
  // The channel is full until cycle 4.
  CHECK(l.transfer(0, 2) == doctest::Approx(5.0));
  // A later transfer leaves the gap before it alone.
  CHECK(l.transfer(20, 4) == doctest::Approx(22.0));
  CHECK(l.transfer(5, 2) == doctest::Approx(6.0));
  CHECK(l.total() == doctest::Approx(16.0));

  // Conservation: n units never finish before n / rate.
  BandwidthLedger m(1.5, 16.0);
  double done = 0;
  for (int i = 0; i < 200; ++i) done = std::max(done, m.transfer((i * 37) % 50, 3));
  CHECK(done >= 600 / 1.5 - 1e-9);

  MemoryChannel ch(10.0);
  ch.transfer(0, 100);
  CHECK(ch.bytes() == 100);
  CHECK(ch.bytes_per_cycle() == 10.0);
}
