#pragma once

#include <string>
#include <vector>

#include "mslice/config.hpp"
#include "mslice/simulator.hpp"

namespace mslice {

/// Comma-separated column names; sweeps append a speedup column.
std::string csv_header(bool with_speedup = false);
std::string csv_row(const SystemConfig& cfg, const SimStats& stats);
std::string csv_row(const SweepRow& row);

/// Short name of the configured workload (preset name or kind).
std::string workload_name(const SystemConfig& cfg);

/// Roofline points for one slice: intensity, attainable FLOPs/s. lo may be 0.
std::vector<RooflinePoint> roofline_points(const SliceConfig& cfg, double lo, double hi, std::size_t points);
std::string roofline_csv(const SliceConfig& cfg, const std::vector<RooflinePoint>& points);

}  // namespace mslice
