#include "mslice/report.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mslice {

namespace {

const char* const kColumns[] = {
    "fingerprint",         "workload",         "num_slices",         "preset",
    "compute_scale",       "mem_bandwidth_gbps", "total_cycles",     "flops",
    "mem_read_bytes",      "mem_write_bytes",  "packets",            "flits",
    "mean_packet_latency", "max_packet_latency", "peak_link_utilization", "energy_memory_j",
    "energy_compute_j",    "energy_network_j", "energy_total_j",     "achieved_flops_per_sec",
    "achieved_flops_per_joule", "mean_utilization", "load_iterations", "intensity",
    "measured_intensity",  "roofline_bound",   "programming_packets", "programming_flits",
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string num(std::uint64_t v) { return std::to_string(v); }

}  // namespace

std::string workload_name(const SystemConfig& cfg) {
  if (!cfg.workload.preset.empty()) return cfg.workload.preset;
  return std::string(to_string(cfg.workload.kind));
}

std::string csv_header(bool with_speedup) {
  std::string out;
  for (const char* c : kColumns) {
    if (!out.empty()) out += ',';
    out += c;
  }
  if (with_speedup) out += ",speedup";
  return out;
}

std::string csv_row(const SystemConfig& cfg, const SimStats& s) {
  std::vector<std::string> f = {
      config_fingerprint(cfg),
      workload_name(cfg),
      num(static_cast<std::uint64_t>(cfg.num_slices)),
      std::string(to_string(cfg.slice.memory.kind)),
      num(cfg.slice.compute_scale),
      num(cfg.slice.mem_bandwidth_gbps()),
      num(s.total_cycles),
      num(s.flops),
      num(s.mem_read_bytes),
      num(s.mem_write_bytes),
      num(s.packets),
      num(s.flits),
      num(s.mean_packet_latency),
      num(s.max_packet_latency),
      num(s.peak_link_utilization),
      num(s.energy_memory_j),
      num(s.energy_compute_j),
      num(s.energy_network_j),
      num(s.energy_total_j),
      num(s.achieved_flops_per_sec),
      num(s.achieved_flops_per_joule),
      num(s.mean_utilization),
      num(s.load_iterations),
      num(s.intensity),
      num(s.measured_intensity),
      num(s.roofline_bound),
      num(s.programming_packets),
      num(s.programming_flits),
  };
  std::string out;
  for (const auto& v : f) {
    if (!out.empty()) out += ',';
    out += v;
  }
  return out;
}

std::string csv_row(const SweepRow& row) { return csv_row(row.config, row.stats) + "," + num(row.speedup); }

std::vector<RooflinePoint> roofline_points(const SliceConfig& cfg, double lo, double hi, std::size_t points) {
  if (!(lo >= 0.0) || !(hi >= lo) || points == 0) throw std::invalid_argument("roofline range must be 0 <= lo <= hi");
  std::vector<RooflinePoint> out;
  // A zero lower end is sampled as is; the rest of the curve is log-spaced.
  if (lo == 0.0) {
    out.push_back({0.0, roofline_attainable(cfg, 0.0), std::nullopt});
    if (--points == 0 || hi == 0.0) return out;
    lo = std::min(1.0, hi);
  }
  for (std::size_t i = 0; i < points; ++i) {
    double x = points == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(points - 1));
    out.push_back({x, roofline_attainable(cfg, x), std::nullopt});
  }
  return out;
}

std::string roofline_csv(const SliceConfig& cfg, const std::vector<RooflinePoint>& points) {
  std::string out = "intensity,attainable_flops_per_sec,peak_flops_per_sec,bandwidth_bytes_per_sec,achieved\n";
  for (const auto& p : points) {
    out += num(p.intensity) + "," + num(p.attainable) + "," + num(peak_flops(cfg)) + "," +
           num(cfg.mem_bandwidth_gbps() * 1e9) + "," + (p.achieved ? num(*p.achieved) : std::string()) + "\n";
  }
  return out;
}

}  // namespace mslice
