#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mslice {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Memory technology backing each slice (one HMC vault or HBM channel).
enum class MemoryKind { hmc1, hmc2, hbm, custom };

struct MemoryTech {
  MemoryKind kind = MemoryKind::hmc2;
  double per_slice_bandwidth_gbps = 20.0;  // GB/s, 1e9 bytes per second
  double access_energy_pj_per_bit = 3.7;

  static MemoryTech preset(MemoryKind kind);
  bool operator==(const MemoryTech&) const = default;
};

std::string_view to_string(MemoryKind kind);
/// Accepts hmc1/hmc2/hbm/custom in any case ("HBM", "hmc2", ...).
std::optional<MemoryKind> parse_memory_kind(std::string_view name);

/// Hardware parameters of one slice.
struct SliceConfig {
  std::size_t array_rows = 256;
  std::size_t array_cols = 8;
  unsigned mult_latency = 3;        // cycles, also the wave initiation interval
  unsigned adder_tree_latency = 3;  // cycles
  double clock_ghz = 2.0;
  unsigned element_width = 16;  // bits
  MemoryTech memory = MemoryTech::preset(MemoryKind::hmc2);
  double flop_energy_pj = 2.0;
  double compute_scale = 1.0;
  std::size_t preload_cycles = 256;  // cycles to fill a full Register B

  double mem_bandwidth_gbps() const noexcept { return memory.per_slice_bandwidth_gbps; }
  double mem_energy_pj_per_bit() const noexcept { return memory.access_energy_pj_per_bit; }
  /// Bytes the memory channel delivers per clock cycle.
  double bytes_per_cycle() const noexcept { return memory.per_slice_bandwidth_gbps / clock_ghz; }
  std::size_t element_bytes() const noexcept { return (element_width + 7) / 8; }
  /// Multiplier rows actually built: array_rows scaled by compute_scale and
  /// organised as side-by-side sub-arrays that share the streamed operand.
  std::size_t effective_rows() const noexcept;

  bool operator==(const SliceConfig&) const = default;
};

/// Interconnect geometry and timing (2D mesh, dimension-order wormhole).
struct IcnConfig {
  std::size_t mesh_x = 16;
  std::size_t mesh_y = 16;
  unsigned flit_width = 128;  // bits
  unsigned router_latency = 1;
  unsigned link_latency = 1;
  std::size_t max_payload = 32;  // elements per packet
  double energy_pj_per_bit = 1.0;

  bool operator==(const IcnConfig&) const = default;
};

enum class WorkloadKind { translator, conv };

/// Workload block of the config file. Field meaning depends on kind.
struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::translator;
  std::string preset;  // empty when fully specified by fields below
  // translator
  std::size_t hidden = 4;
  std::size_t layers = 5;
  std::size_t src_len = 2;
  std::size_t dst_len = 2;
  std::size_t time_steps = 1;
  double eta = 0.01;
  bool training = true;
  // conv
  std::size_t channels = 3;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t kernels = 4;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;

  bool operator==(const WorkloadSpec&) const = default;
};

std::string_view to_string(WorkloadKind kind);

struct SystemConfig {
  SliceConfig slice;
  IcnConfig icn;
  std::size_t num_slices = 4;
  std::size_t batch_size = 4;
  std::uint64_t seed = 1;
  bool dual_mapping = true;
  std::uint64_t slice_capacity_bytes = 0;  // 0 = unlimited
  WorkloadSpec workload;

  bool operator==(const SystemConfig&) const = default;
};

inline constexpr std::uint64_t kOneGigabyte = 1ull << 30;

/// Throws ConfigError naming the violated invariant.
void validate(const SliceConfig& cfg);
void validate(const SystemConfig& cfg);

/// Peak multiply+add rate of one slice in FLOPs/s:
/// 2 * rows * cols * compute_scale * clock / mult_latency.
/// Multiplies and adds both count as FLOPs.
double peak_flops(const SliceConfig& cfg);

/// min(peak, intensity * bandwidth) for one slice.
double roofline_attainable(const SliceConfig& cfg, double intensity);
double roofline_attainable(const SystemConfig& cfg, double intensity);
/// Intensity where the bandwidth roof meets the compute roof.
double roofline_knee(const SliceConfig& cfg);

struct RooflinePoint {
  double intensity = 0.0;
  double attainable = 0.0;
  std::optional<double> achieved;
};

SystemConfig parse_config(std::string_view text);
SystemConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const SystemConfig& cfg);
/// FNV-1a over the serialized config, as 16 hex digits.
std::string config_fingerprint(const SystemConfig& cfg);

/// Applies a memory preset to the slice, keeping other parameters.
void apply_memory_preset(SystemConfig& cfg, MemoryKind kind);

/// Expands a named workload preset into the workload fields and batch size.
/// Names: lstm0..lstm3 (full-size translator shapes),
/// lstm0-desk..lstm3-desk, reload-heavy, compute-bound, conv-desk.
/// Throws ConfigError for unknown names.
void apply_workload_preset(SystemConfig& cfg, std::string_view name);
std::vector<std::string> workload_preset_names();

}  // namespace mslice
