#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mslice/config.hpp"
#include "mslice/graph.hpp"
#include "mslice/icn.hpp"
#include "mslice/matrix.hpp"
#include "mslice/partitioner.hpp"
#include "mslice/slice_engine.hpp"
#include "mslice/workloads.hpp"

namespace mslice {

/// Protocol steps of one task, numbered 1..9.
enum class Step : unsigned {
  preload = 1,    // Register B load from the slice memory
  stream = 2,     // Register A streaming starts
  multiply = 3,   // first products leave the multipliers
  adder = 4,      // first row sums leave the adder trees
  packetize = 5,  // partial sums handed to the network interface
  inject = 6,     // packet injected (or routed to the local port)
  deliver = 7,    // packet delivered at the owner slice
  aggregate = 8,  // aggregation engine accumulates / applies post-ops
  writeback = 9,  // result written to the owner's memory
};

struct TraceRecord {
  double cycle = 0.0;
  SliceId slice = 0;  // where the event happens
  Step step = Step::preload;
  NodeId node = 0;       // task = (node, task_slice)
  SliceId task_slice = 0;
};

class EventTrace {
 public:
  void add(double cycle, SliceId slice, Step step, NodeId node, SliceId task_slice) {
    records_.push_back({cycle, slice, step, node, task_slice});
  }
  const std::vector<TraceRecord>& records() const noexcept { return records_; }
  bool empty() const noexcept { return records_.empty(); }
  /// Orders records by (cycle, slice, step, node, task slice).
  void finalize();
  /// One record per line: cycle slice step node:task_slice.
  std::string to_text() const;

  struct Check {
    bool ok = true;
    std::size_t tasks = 0;
    std::string detail;
  };
  /// Per task, the first occurrence of each step must not precede the first
  /// occurrence of an earlier step. With `complete`, every matmul task must
  /// show all nine steps.
  Check check_protocol(const OpGraph& graph, bool complete) const;

 private:
  std::vector<TraceRecord> records_;
};

struct SimStats {
  std::size_t num_slices = 0;
  double total_cycles = 0.0;
  double flops = 0.0;
  double mem_read_bytes = 0.0;
  double mem_write_bytes = 0.0;
  std::uint64_t packets = 0;
  std::uint64_t flits = 0;
  double mean_packet_latency = 0.0;
  double max_packet_latency = 0.0;
  double peak_link_utilization = 0.0;
  double energy_memory_j = 0.0;
  double energy_compute_j = 0.0;
  double energy_network_j = 0.0;
  double energy_total_j = 0.0;
  double achieved_flops_per_sec = 0.0;
  double achieved_flops_per_joule = 0.0;
  std::vector<double> utilization;  // per slice, multiplier array busy fraction
  double mean_utilization = 0.0;
  std::uint64_t load_iterations = 0;  // Register B loads actually performed
  std::uint64_t waves = 0;
  double intensity = 0.0;           // workload FLOPs per unique byte
  double measured_intensity = 0.0;  // FLOPs per byte actually moved
  double roofline_bound = 0.0;      // num_slices * min(peak, measured I * BW)
  std::uint64_t programming_packets = 0;
  std::uint64_t programming_flits = 0;
  std::uint64_t im2col_bytes = 0;
  std::uint64_t partial_packets = 0;
  std::uint64_t partial_packets_verified = 0;  // index reconstruction matched
  std::uint64_t aggregations = 0;              // partials accumulated

  double mem_bytes() const noexcept { return mem_read_bytes + mem_write_bytes; }
};

struct EnergyBreakdown {
  double memory_j = 0.0;
  double compute_j = 0.0;
  double network_j = 0.0;
  double total_j = 0.0;
};

/// memory = bits * pJ/bit, compute = flops * pJ/FLOP, network = flits *
/// flit_width * pJ/bit; total is their sum.
EnergyBreakdown energy_account(double mem_bytes, double flops, std::uint64_t flits, const SystemConfig& cfg);

struct SimOptions {
  bool functional = true;  // compute values; off = timing and traffic only
  bool trace = false;
};

struct SimResult {
  SimStats stats;
  EventTrace trace;
  /// Final contents of every matrix (functional runs only).
  std::map<MatrixId, MatrixF> values;
};

SimResult simulate(const Workload& workload, const GraphPlan& plan, const SystemConfig& cfg,
                   const SimOptions& options = {});

/// Builds the configured workload, plans it and simulates it.
SimResult run_system(const SystemConfig& cfg, const SimOptions& options = {});

enum class SweepAxis { num_slices, compute_scale, memory };
SweepAxis parse_sweep_axis(const std::string& name);

struct SweepRow {
  std::string value;
  SystemConfig config;
  SimStats stats;
  double speedup = 0.0;  // throughput relative to the first row
  std::string error;     // set when the run failed
};

/// One run per value, concurrently; rows come back in parameter order
/// (numeric axes ascending, memory presets by bandwidth).
std::vector<SweepRow> sweep(const SystemConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                            const SimOptions& options = {});

}  // namespace mslice
