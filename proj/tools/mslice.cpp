// mslice: plan, run, sweep and roofline experiments from the command line.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mslice/config.hpp"
#include "mslice/partitioner.hpp"
#include "mslice/report.hpp"
#include "mslice/simulator.hpp"
#include "mslice/workloads.hpp"

namespace fs = std::filesystem;
using namespace mslice;

namespace {

constexpr int kOk = 0;
constexpr int kSimFailure = 1;
constexpr int kUsage = 2;

struct Overrides {
  std::string config;
  std::string preset;
  std::optional<std::size_t> slices;
  std::optional<double> compute_scale;
  std::optional<double> mem_bandwidth;
  std::string workload;
  std::optional<std::size_t> hidden, batch, src_len, dst_len, time_steps, layers;
  std::optional<bool> training;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool timing_only = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "Config file (key = value, [sections])");
  sub->add_option("--preset", o.preset, "Memory technology preset: hmc1, hmc2, hbm");
  sub->add_option("--slices", o.slices, "Number of memory slices")->check(CLI::PositiveNumber);
  sub->add_option("--compute-scale", o.compute_scale, "Multiplier array scale factor")->check(CLI::PositiveNumber);
  sub->add_option("--mem-bandwidth", o.mem_bandwidth, "Per-slice memory bandwidth in GB/s (custom memory)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--workload", o.workload, "translator, conv, or a workload preset name");
  sub->add_option("--H", o.hidden, "Translator hidden size")->check(CLI::PositiveNumber);
  sub->add_option("--batch", o.batch, "Batch size")->check(CLI::PositiveNumber);
  sub->add_option("--src-len", o.src_len, "Source sentence length")->check(CLI::PositiveNumber);
  sub->add_option("--dst-len", o.dst_len, "Target sentence length")->check(CLI::PositiveNumber);
  sub->add_option("--time-steps", o.time_steps, "Training time steps")->check(CLI::PositiveNumber);
  sub->add_option("--layers", o.layers, "Translator layers (1 or >= 3)")->check(CLI::PositiveNumber);
  sub->add_flag("--training,!--forward-only", o.training, "Include backward pass and weight updates");
  sub->add_option("--seed", o.seed, "Data seed");
  sub->add_option("--out", o.out, "Output file (default: stdout, or $MSLICE_OUT_DIR/<command>.csv)");
  sub->add_flag("--timing-only", o.timing_only, "Skip functional values; timing and traffic only");
}

SystemConfig make_config(const Overrides& o) {
  SystemConfig cfg = o.config.empty() ? SystemConfig{} : load_config(o.config);
  if (!o.workload.empty()) {
    if (o.workload == "translator") {
      cfg.workload.kind = WorkloadKind::translator;
      cfg.workload.preset.clear();
    } else if (o.workload == "conv") {
      cfg.workload.kind = WorkloadKind::conv;
      cfg.workload.preset.clear();
    } else {
      apply_workload_preset(cfg, o.workload);
    }
  }
  if (!o.preset.empty()) {
    auto kind = parse_memory_kind(o.preset);
    if (!kind || *kind == MemoryKind::custom) throw ConfigError("unknown memory preset '" + o.preset + "'");
    apply_memory_preset(cfg, *kind);
  }
  if (o.mem_bandwidth) {
    cfg.slice.memory.kind = MemoryKind::custom;
    cfg.slice.memory.per_slice_bandwidth_gbps = *o.mem_bandwidth;
  }
  if (o.slices) cfg.num_slices = *o.slices;
  if (o.compute_scale) cfg.slice.compute_scale = *o.compute_scale;
  if (o.hidden) cfg.workload.hidden = *o.hidden;
  if (o.batch) cfg.batch_size = *o.batch;
  if (o.src_len) cfg.workload.src_len = *o.src_len;
  if (o.dst_len) cfg.workload.dst_len = *o.dst_len;
  if (o.time_steps) cfg.workload.time_steps = *o.time_steps;
  if (o.layers) cfg.workload.layers = *o.layers;
  if (o.training) cfg.workload.training = *o.training;
  if (o.seed) cfg.seed = *o.seed;
  validate(cfg);
  return cfg;
}

fs::path default_dir() {
  const char* dir = std::getenv("MSLICE_OUT_DIR");
  return dir && *dir ? fs::path(dir) : fs::path();
}

/// Writes to --out, else $MSLICE_OUT_DIR/<name>, else stdout.
void emit(const Overrides& o, const std::string& name, const std::string& text) {
  fs::path path = o.out;
  if (path.empty() && !default_dir().empty()) path = default_dir() / name;
  if (path.empty()) {
    std::cout << text;
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw ConfigError("cannot write " + path.string());
}

fs::path trace_path(const Overrides& o, const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  if (!o.out.empty()) return fs::path(o.out).string() + ".trace";
  if (!default_dir().empty()) return default_dir() / "trace.txt";
  return "mslice_trace.txt";
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-slice near-data processing simulator"};
  app.require_subcommand(1);

  Overrides plan_o, run_o, sweep_o, roof_o;
  auto* plan = app.add_subcommand("plan", "Partition the workload and dump the plan");
  add_common(plan, plan_o);

  auto* run = app.add_subcommand("run", "Simulate one configuration and print a CSV row");
  add_common(run, run_o);
  bool trace = false;
  std::string trace_file;
  run->add_flag("--trace", trace, "Write the per-task event trace");
  run->add_option("--trace-file", trace_file, "Trace path (default: <out>.trace, $MSLICE_OUT_DIR/trace.txt)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run one configuration per axis value");
  add_common(sweep_cmd, sweep_o);
  std::string axis, values;
  sweep_cmd->add_option("--axis", axis, "num_slices, compute_scale or memory")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated axis values")->required();

  auto* roof = app.add_subcommand("roofline", "Attainable-performance curve and workload working point");
  add_common(roof, roof_o);
  double lo = 1.0, hi = 4096.0;
  std::size_t points = 25;
  bool achieved = false;
  roof->add_option("--min-intensity", lo, "Lowest sampled intensity (FLOPs/byte)");
  roof->add_option("--max-intensity", hi, "Highest sampled intensity");
  roof->add_option("--points", points, "Samples on the curve")->check(CLI::PositiveNumber);
  roof->add_flag("--achieved", achieved, "Also simulate the workload and add its achieved point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (plan->parsed()) {
      SystemConfig cfg = make_config(plan_o);
      Workload w = build_workload(cfg);
      GraphPlan p = plan_graph(w.graph, cfg.num_slices, cfg.slice, {cfg.dual_mapping, cfg.slice_capacity_bytes});
      emit(plan_o, "plan.txt", dump_plan(w.graph, p));
      return kOk;
    }
    if (run->parsed()) {
      SystemConfig cfg = make_config(run_o);
      SimOptions opt;
      opt.functional = !run_o.timing_only;
      opt.trace = trace || !trace_file.empty();
      SimResult r = run_system(cfg, opt);
      emit(run_o, "run.csv", csv_header() + "\n" + csv_row(cfg, r.stats) + "\n");
      if (opt.trace) {
        fs::path tp = trace_path(run_o, trace_file);
        if (tp.has_parent_path()) fs::create_directories(tp.parent_path());
        std::ofstream f(tp);
        f << r.trace.to_text();
        if (!f) throw ConfigError("cannot write " + tp.string());
      }
      return kOk;
    }
    if (sweep_cmd->parsed()) {
      SystemConfig cfg = make_config(sweep_o);
      SimOptions opt;
      opt.functional = !sweep_o.timing_only;
      auto rows = sweep(cfg, parse_sweep_axis(axis), split(values), opt);
      std::string text = csv_header(true) + "\n";
      int rc = kOk;
      for (const auto& r : rows) {
        text += csv_row(r) + "\n";
        if (!r.error.empty()) {
          std::cerr << "mslice: run " << axis << "=" << r.value << " failed: " << r.error << "\n";
          rc = kSimFailure;
        }
      }
      emit(sweep_o, "sweep.csv", text);
      return rc;
    }
    if (roof->parsed()) {
      SystemConfig cfg = make_config(roof_o);
      auto pts = roofline_points(cfg.slice, lo, hi, points);
      Workload w = build_workload(cfg);
      double work_i = intensity(w.graph);
      pts.push_back({work_i, roofline_attainable(cfg.slice, work_i), std::nullopt});
      if (achieved) {
        SimOptions opt;
        opt.functional = !roof_o.timing_only;
        SimResult r = run_system(cfg, opt);
        double per_slice = r.stats.achieved_flops_per_sec / static_cast<double>(cfg.num_slices);
        pts.push_back({r.stats.measured_intensity, roofline_attainable(cfg.slice, r.stats.measured_intensity),
                       per_slice});
      }
      emit(roof_o, "roofline.csv", roofline_csv(cfg.slice, pts));
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "mslice: config error: " << e.what() << "\n";
    return kUsage;
  } catch (const GraphError& e) {
    std::cerr << "mslice: workload error: " << e.what() << "\n";
    return kUsage;
  } catch (const PlanError& e) {
    std::cerr << "mslice: plan error: " << e.what() << "\n";
    return kSimFailure;
  } catch (const SimError& e) {
    std::cerr << "mslice: simulation error: " << e.what() << "\n";
    return kSimFailure;
  } catch (const std::exception& e) {
    std::cerr << "mslice: error: " << e.what() << "\n";
    return kSimFailure;
  }
  return kUsage;
}
