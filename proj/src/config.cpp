#include "mslice/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace mslice {

MemoryTech MemoryTech::preset(MemoryKind kind) {
  switch (kind) {
    case MemoryKind::hmc1: return {kind, 10.0, 3.7};
    case MemoryKind::hmc2: return {kind, 20.0, 3.7};
    case MemoryKind::hbm: return {kind, 16.0, 6.0};
    case MemoryKind::custom: return {kind, 20.0, 3.7};
  }
  return {};
}

std::string_view to_string(MemoryKind kind) {
  switch (kind) {
    case MemoryKind::hmc1: return "hmc1";
    case MemoryKind::hmc2: return "hmc2";
    case MemoryKind::hbm: return "hbm";
    case MemoryKind::custom: return "custom";
  }
  return "custom";
}

std::string_view to_string(WorkloadKind kind) {
  return kind == WorkloadKind::translator ? "translator" : "conv";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::optional<MemoryKind> parse_memory_kind(std::string_view name) {
  auto n = lower(name);
  if (n == "hmc1") return MemoryKind::hmc1;
  if (n == "hmc2") return MemoryKind::hmc2;
  if (n == "hbm") return MemoryKind::hbm;
  if (n == "custom") return MemoryKind::custom;
  return std::nullopt;
}

std::size_t SliceConfig::effective_rows() const noexcept {
  return static_cast<std::size_t>(std::floor(static_cast<double>(array_rows) * compute_scale + 1e-9));
}

void validate(const SliceConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("invalid slice config: " + what); };
  if (c.array_rows < 1) fail("array_rows >= 1");
  if (c.array_cols < 1) fail("array_cols >= 1");
  if (c.mult_latency < 1) fail("mult_latency >= 1");
  if (c.adder_tree_latency < 1) fail("adder_tree_latency >= 1");
  if (c.element_width < 1) fail("element_width >= 1");
  if (c.preload_cycles < 1) fail("preload_cycles >= 1");
  if (!(c.clock_ghz > 0)) fail("clock > 0");
  if (!(c.memory.per_slice_bandwidth_gbps > 0)) fail("mem_bandwidth > 0");
  if (!(c.memory.access_energy_pj_per_bit > 0)) fail("mem_energy > 0");
  if (!(c.flop_energy_pj > 0)) fail("flop_energy > 0");
  if (!(c.compute_scale >= 1.0)) fail("compute_scale >= 1");
}

void validate(const SystemConfig& c) {
  validate(c.slice);
  auto fail = [](const std::string& what) { throw ConfigError("invalid system config: " + what); };
  if (c.num_slices < 1) fail("num_slices >= 1");
  if (c.batch_size < 1) fail("batch_size >= 1");
  if (c.icn.mesh_x < 1 || c.icn.mesh_y < 1) fail("mesh dimensions >= 1");
  if (c.num_slices > c.icn.mesh_x * c.icn.mesh_y) fail("num_slices <= mesh_x * mesh_y");
  if (c.icn.flit_width < c.slice.element_width) fail("flit_width >= element_width");
  if (c.icn.router_latency < 1 || c.icn.link_latency < 1) fail("icn latencies >= 1");
  if (c.icn.max_payload < 1) fail("max_payload >= 1");
  if (!(c.icn.energy_pj_per_bit >= 0)) fail("icn energy >= 0");
  const auto& w = c.workload;
  if (w.kind == WorkloadKind::translator) {
    if (w.hidden < 1) fail("workload hidden >= 1");
    if (w.layers != 1 && w.layers < 3) fail("workload layers == 1 or >= 3");
    if (w.src_len < 1 || w.dst_len < 1) fail("workload bucket lengths >= 1");
    if (w.time_steps < 1) fail("workload time_steps >= 1");
    if (!(w.eta > 0)) fail("workload eta > 0");
  } else {
    if (w.channels < 1 || w.height < 1 || w.width < 1 || w.kernels < 1 || w.kernel_h < 1 || w.kernel_w < 1)
      fail("conv dimensions >= 1");
    if (w.stride < 1) fail("conv stride >= 1");
  }
}

double peak_flops(const SliceConfig& cfg) {
  return 2.0 * static_cast<double>(cfg.array_rows) * static_cast<double>(cfg.array_cols) * cfg.compute_scale *
         cfg.clock_ghz * 1e9 / static_cast<double>(cfg.mult_latency);
}

double roofline_attainable(const SliceConfig& cfg, double intensity) {
  return std::min(peak_flops(cfg), intensity * cfg.mem_bandwidth_gbps() * 1e9);
}

double roofline_attainable(const SystemConfig& cfg, double intensity) {
  return roofline_attainable(cfg.slice, intensity) * static_cast<double>(cfg.num_slices);
}

double roofline_knee(const SliceConfig& cfg) { return peak_flops(cfg) / (cfg.mem_bandwidth_gbps() * 1e9); }

void apply_memory_preset(SystemConfig& cfg, MemoryKind kind) { cfg.slice.memory = MemoryTech::preset(kind); }

namespace {

struct WorkloadPreset {
  const char* name;
  WorkloadKind kind;
  std::size_t hidden, layers, src_len, dst_len, time_steps, batch;
  bool training;
};

// Full-size entries are GNMT-like translator shapes chosen for this tool.
// Desk variants shrink H and the bucket so they simulate in seconds.
constexpr WorkloadPreset kWorkloadPresets[] = {
    {"lstm0", WorkloadKind::translator, 1024, 8, 40, 50, 4, 64, true},
    {"lstm1", WorkloadKind::translator, 512, 5, 20, 25, 4, 64, true},
    {"lstm2", WorkloadKind::translator, 256, 5, 10, 12, 4, 32, true},
    {"lstm3", WorkloadKind::translator, 128, 3, 8, 8, 4, 16, true},
    {"lstm0-desk", WorkloadKind::translator, 32, 8, 5, 6, 2, 8, true},
    {"lstm1-desk", WorkloadKind::translator, 16, 5, 3, 3, 2, 8, true},
    {"lstm2-desk", WorkloadKind::translator, 8, 5, 2, 2, 1, 4, true},
    {"lstm3-desk", WorkloadKind::translator, 4, 3, 2, 2, 1, 4, true},
    // One LSTM layer whose 2H x 4H weight spans several Register B tiles per
    // slice; batch 1 keeps streaming short so reloads dominate.
    {"reload-heavy", WorkloadKind::translator, 64, 1, 8, 8, 1, 1, false},
    // Large batch and H: every Register B tile is reused by thousands of waves.
    {"compute-bound", WorkloadKind::translator, 2048, 3, 1, 1, 1, 2048, false},
    {"conv-desk", WorkloadKind::conv, 0, 0, 0, 0, 0, 2, false},
};

}  // namespace

void apply_workload_preset(SystemConfig& cfg, std::string_view name) {
  for (const auto& p : kWorkloadPresets) {
    if (name != p.name) continue;
    WorkloadSpec w;
    w.preset = p.name;
    w.kind = p.kind;
    if (p.kind == WorkloadKind::translator) {
      w.hidden = p.hidden;
      w.layers = p.layers;
      w.src_len = p.src_len;
      w.dst_len = p.dst_len;
      w.time_steps = p.time_steps;
      w.training = p.training;
    } else {
      w.channels = 3;
      w.height = 16;
      w.width = 16;
      w.kernels = 8;
      w.kernel_h = 3;
      w.kernel_w = 3;
      w.training = false;
    }
    cfg.workload = w;
    cfg.batch_size = p.batch;
    return;
  }
  throw ConfigError("unknown workload preset '" + std::string(name) + "'");
}

std::vector<std::string> workload_preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kWorkloadPresets) out.emplace_back(p.name);
  return out;
}

// ---------------------------------------------------------------------------
// Text format: INI-like sections with `key = value` (or `key: value`) lines,
// `#` comments. A top-level `memory = <preset>` line is shorthand for the
// [memory] preset key.

namespace {

struct Field {
  std::function<void(SystemConfig&, const std::string&)> set;
  std::function<std::string(const SystemConfig&)> get;
};

template <class T>
T parse_number(const std::string& v) {
  T out{};
  const char* b = v.data();
  const char* e = v.data() + v.size();
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    out = static_cast<T>(std::strtod(b, &end));
    if (end != e || v.empty()) throw ConfigError("expected a number, got '" + v + "'");
  } else {
    if (!v.empty() && v[0] == '-') throw ConfigError("expected a non-negative integer, got '" + v + "'");
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e) throw ConfigError("expected an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v) {
  auto l = lower(v);
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

template <class T, class Get>
Field num_field(Get access) {
  return {[access](SystemConfig& c, const std::string& v) { access(c) = parse_number<T>(v); },
          [access](const SystemConfig& c) {
            auto& cc = const_cast<SystemConfig&>(c);
            if constexpr (std::is_floating_point_v<T>) return fmt_double(access(cc));
            else return std::to_string(access(cc));
          }};
}

template <class Get>
Field bool_field(Get access) {
  return {[access](SystemConfig& c, const std::string& v) { access(c) = parse_bool(v); },
          [access](const SystemConfig& c) {
            return std::string(access(const_cast<SystemConfig&>(c)) ? "true" : "false");
          }};
}

using FieldTable = std::vector<std::pair<std::string, Field>>;

const std::map<std::string, FieldTable>& schema() {
  static const std::map<std::string, FieldTable> table = [] {
    std::map<std::string, FieldTable> t;
    t["slice"] = {
        {"array_rows", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.slice.array_rows; })},
        {"array_cols", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.slice.array_cols; })},
        {"mult_latency", num_field<unsigned>([](SystemConfig& c) -> auto& { return c.slice.mult_latency; })},
        {"adder_tree_latency",
         num_field<unsigned>([](SystemConfig& c) -> auto& { return c.slice.adder_tree_latency; })},
        {"clock_ghz", num_field<double>([](SystemConfig& c) -> auto& { return c.slice.clock_ghz; })},
        {"element_width", num_field<unsigned>([](SystemConfig& c) -> auto& { return c.slice.element_width; })},
        {"flop_energy_pj", num_field<double>([](SystemConfig& c) -> auto& { return c.slice.flop_energy_pj; })},
        {"compute_scale", num_field<double>([](SystemConfig& c) -> auto& { return c.slice.compute_scale; })},
        {"preload_cycles",
         num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.slice.preload_cycles; })},
    };
    t["memory"] = {
        {"preset",
         {[](SystemConfig& c, const std::string& v) {
            auto k = parse_memory_kind(v);
            if (!k) throw ConfigError("unknown memory preset '" + v + "'");
            c.slice.memory.kind = *k;
          },
          [](const SystemConfig& c) { return std::string(to_string(c.slice.memory.kind)); }}},
        {"bandwidth_gbps",
         num_field<double>([](SystemConfig& c) -> auto& { return c.slice.memory.per_slice_bandwidth_gbps; })},
        {"access_energy_pj_per_bit",
         num_field<double>([](SystemConfig& c) -> auto& { return c.slice.memory.access_energy_pj_per_bit; })},
    };
    t["icn"] = {
        {"mesh_x", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.icn.mesh_x; })},
        {"mesh_y", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.icn.mesh_y; })},
        {"flit_width", num_field<unsigned>([](SystemConfig& c) -> auto& { return c.icn.flit_width; })},
        {"router_latency", num_field<unsigned>([](SystemConfig& c) -> auto& { return c.icn.router_latency; })},
        {"link_latency", num_field<unsigned>([](SystemConfig& c) -> auto& { return c.icn.link_latency; })},
        {"max_payload", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.icn.max_payload; })},
        {"energy_pj_per_bit", num_field<double>([](SystemConfig& c) -> auto& { return c.icn.energy_pj_per_bit; })},
    };
    t["system"] = {
        {"num_slices", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.num_slices; })},
        {"batch_size", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.batch_size; })},
        {"seed", num_field<std::uint64_t>([](SystemConfig& c) -> auto& { return c.seed; })},
        {"dual_mapping", bool_field([](SystemConfig& c) -> auto& { return c.dual_mapping; })},
        {"slice_capacity_bytes",
         num_field<std::uint64_t>([](SystemConfig& c) -> auto& { return c.slice_capacity_bytes; })},
    };
    t["workload"] = {
        {"kind",
         {[](SystemConfig& c, const std::string& v) {
            auto l = lower(v);
            if (l == "translator") c.workload.kind = WorkloadKind::translator;
            else if (l == "conv") c.workload.kind = WorkloadKind::conv;
            else throw ConfigError("unknown workload kind '" + v + "'");
          },
          [](const SystemConfig& c) { return std::string(to_string(c.workload.kind)); }}},
        {"preset",
         {[](SystemConfig& c, const std::string& v) { c.workload.preset = v; },
          [](const SystemConfig& c) { return c.workload.preset.empty() ? std::string("none") : c.workload.preset; }}},
        {"hidden", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.hidden; })},
        {"layers", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.layers; })},
        {"src_len", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.src_len; })},
        {"dst_len", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.dst_len; })},
        {"time_steps", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.time_steps; })},
        {"eta", num_field<double>([](SystemConfig& c) -> auto& { return c.workload.eta; })},
        {"training", bool_field([](SystemConfig& c) -> auto& { return c.workload.training; })},
        {"channels", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.channels; })},
        {"height", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.height; })},
        {"width", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.width; })},
        {"kernels", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.kernels; })},
        {"kernel_h", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.kernel_h; })},
        {"kernel_w", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.kernel_w; })},
        {"stride", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.stride; })},
        {"padding", num_field<std::size_t>([](SystemConfig& c) -> auto& { return c.workload.padding; })},
    };
    return t;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  auto it = schema().find(section);
  if (it == schema().end()) return nullptr;
  for (const auto& [name, field] : it->second)
    if (name == key) return &field;
  return nullptr;
}

}  // namespace

SystemConfig parse_config(std::string_view text) {
  struct Entry {
    std::string section, key, value;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    auto line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    auto err = [&](const std::string& what) {
      return ConfigError("config line " + std::to_string(line_no) + ": " + what);
    };
    if (line.front() == '[') {
      if (line.back() != ']') throw err("unterminated section header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (!schema().contains(section)) throw err("unknown section [" + section + "]");
      continue;
    }
    auto sep = line.find_first_of("=:");
    if (sep == std::string::npos) throw err("expected 'key = value'");
    auto key = lower(trim(line.substr(0, sep)));
    auto value = trim(line.substr(sep + 1));
    if (key.empty()) throw err("empty key");
    if (value.empty()) throw err("empty value for '" + key + "'");
    std::string sec = section;
    if (sec.empty()) {
      if (key != "memory") throw err("unknown top-level key '" + key + "'");
      sec = "memory";
      key = "preset";
    }
    if (!find_field(sec, key)) throw err("unknown key '" + key + "' in [" + sec + "]");
    entries.push_back({sec, key, value, line_no});
  }

  SystemConfig cfg;
  // Presets expand first so explicit bandwidth/energy keys override them.
  for (const auto& e : entries) {
    if (e.section == "memory" && e.key == "preset") {
      auto kind = parse_memory_kind(e.value);
      if (!kind) throw ConfigError("config line " + std::to_string(e.line) + ": unknown memory preset '" + e.value + "'");
      cfg.slice.memory = MemoryTech::preset(*kind);
    }
    if (e.section == "workload" && e.key == "preset" && lower(e.value) != "none") {
      try {
        apply_workload_preset(cfg, e.value);
      } catch (const ConfigError& ex) {
        throw ConfigError("config line " + std::to_string(e.line) + ": " + ex.what());
      }
    }
  }
  bool preload_set = false;
  for (const auto& e : entries) {
    if (e.section == "memory" && e.key == "preset") continue;
    if (e.section == "workload" && e.key == "preset") continue;
    try {
      find_field(e.section, e.key)->set(cfg, e.value);
    } catch (const ConfigError& ex) {
      throw ConfigError("config line " + std::to_string(e.line) + ": " + ex.what());
    }
    if (e.section == "slice" && e.key == "preload_cycles") preload_set = true;
  }
  if (cfg.workload.preset == "none") cfg.workload.preset.clear();
  if (!preload_set) cfg.slice.preload_cycles = cfg.slice.array_rows;
  validate(cfg);
  return cfg;
}

SystemConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const SystemConfig& cfg) {
  std::string out;
  for (const char* section : {"slice", "memory", "icn", "system", "workload"}) {
    out += "[";
    out += section;
    out += "]\n";
    for (const auto& [name, field] : schema().at(section)) out += name + " = " + field.get(cfg) + "\n";
    out += "\n";
  }
  return out;
}

std::string config_fingerprint(const SystemConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : serialize_config(cfg)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mslice
