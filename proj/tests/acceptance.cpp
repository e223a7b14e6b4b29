// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mslice/oracle.hpp"
#include "mslice/report.hpp"
#include "mslice/simulator.hpp"
#include "support/reference_translator.hpp"

using namespace mslice;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MatrixF random_f(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  MatrixF m(r, c);
  for (auto& v : m.data()) v = d(rng);
  return m;
}

SimResult plan_and_run(const Workload& w, const SystemConfig& cfg, const SimOptions& opt = {}) {
  auto plan = plan_graph(w.graph, cfg.num_slices, cfg.slice, {cfg.dual_mapping, cfg.slice_capacity_bytes});
  return simulate(w, plan, cfg, opt);
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  const std::size_t slice_choices[] = {1, 2, 4, 8, 16};
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    std::size_t m = 1 + rng() % 512, k = 1 + rng() % 512, n = 1 + rng() % 512;
    Workload w;
    auto a = w.graph.add_matrix("A", m, k, MatrixRole::input);
    auto b = w.graph.add_matrix("B", k, n, MatrixRole::weight);
    auto c = w.graph.add_matrix("C", m, n, MatrixRole::output);
    OpNode node;
    node.a.parts = {a};
    node.b.parts = {b};
    node.out = {c};
    w.graph.add_node(node);
    w.initial.emplace(a, random_f(m, k, rng));
    w.initial.emplace(b, random_f(k, n, rng));
    SystemConfig cfg;
    cfg.num_slices = slice_choices[rng() % 5];
    auto r = plan_and_run(w, cfg);
    auto ref = oracle::matmul(Matrix::from(w.initial.at(a)), Matrix::from(w.initial.at(b)));
    worst = std::max(worst, relative_error(r.values.at(c), ref));
  }
  double secs = seconds_since(t0);
  return {worst <= 1e-3 && secs < 60.0, fmt("200 cases, max rel err %.3g (<= 1e-3), %.1f s (< 60 s)", worst, secs)};
}

double lstm_fd_error() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  auto rnd = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (auto& v : m.data()) v = d(rng);
    return m;
  };
  const std::size_t H = 3, B = 3;
  oracle::LstmParams p(H, rnd(2 * H, 4 * H));
  Matrix x = rnd(B, H), hp = rnd(B, H), cp = rnd(B, H), wh = rnd(B, H), wc = rnd(B, H);
  auto loss = [&] {
    auto f = oracle::lstm_cell(p, x, hp, cp);
    double s = 0;
    for (std::size_t i = 0; i < f.h.size(); ++i) s += f.h.data()[i] * wh.data()[i] + f.c.data()[i] * wc.data()[i];
    return s;
  };
  auto g = oracle::lstm_backward(p, oracle::make_cache(x, hp, cp, oracle::lstm_cell(p, x, hp, cp)), wh, wc);
  double worst = 0;
  auto probe = [&](Matrix& m, const Matrix& grad) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      double keep = m.data()[i];
      m.data()[i] = keep + 1e-6;
      double up = loss();
      m.data()[i] = keep - 1e-6;
      double dn = loss();
      m.data()[i] = keep;
      worst = std::max(worst, std::abs((up - dn) / 2e-6 - grad.data()[i]));
    }
  };
  probe(p.weight, g.dw);
  probe(x, g.dx);
  probe(hp, g.dh_prev);
  probe(cp, g.dc_prev);
  return worst;
}

Outcome lstm_functional_and_gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  SystemConfig cfg;
  cfg.num_slices = 4;
  cfg.batch_size = 3;
  cfg.workload.hidden = 3;
  cfg.workload.src_len = 2;
  cfg.workload.dst_len = 2;
  cfg.workload.time_steps = 1;
  cfg.workload.training = true;
  auto w = build_workload(cfg);
  auto spec = translator_spec(cfg);
  auto ref = testing::reference_translator(w, spec, true);
  auto r = plan_and_run(w, cfg);

  double fwd = 0.0, dw = 0.0;
  for (const auto& [id, m] : ref.values) fwd = std::max(fwd, relative_error(r.values.at(id), m));
  for (const auto& [wid, grad] : ref.weight_grads) {
    Matrix sum(grad.rows(), grad.cols());
    for (auto part : w.layout.weight_grads.at(wid)) {
      const auto& p = r.values.at(part);
      for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] += p.data()[i];
    }
    dw = std::max(dw, relative_error(sum, grad));
  }
  double fd = lstm_fd_error();
  double secs = seconds_since(t0);
  bool ok = !ref.values.empty() && !ref.weight_grads.empty() && fwd <= 1e-3 && dw <= 1e-3 && fd <= 1e-5 &&
            secs < 30.0;
  return {ok, fmt("forward %.3g, dW %.3g (<= 1e-3), finite differences %.3g (<= 1e-5), %.1f s", fwd, dw, fd, secs)};
}

Outcome roofline_bound() {
  std::mt19937_64 rng(99);
  const MemoryKind kinds[] = {MemoryKind::hmc1, MemoryKind::hmc2, MemoryKind::hbm};
  double worst = 0.0;
  int violations = 0;
  for (int i = 0; i < 50; ++i) {
    SystemConfig cfg;
    cfg.seed = rng();
    cfg.num_slices = 1 + rng() % 16;
    cfg.slice.compute_scale = rng() % 2 ? 2.0 : 1.0;
    apply_memory_preset(cfg, kinds[rng() % 3]);
    cfg.batch_size = 1 + rng() % 8;
    if (rng() % 4 == 0) {
      cfg.workload.kind = WorkloadKind::conv;
      cfg.workload.channels = 1 + rng() % 3;
      cfg.workload.height = cfg.workload.width = 4 + rng() % 8;
      cfg.workload.kernels = 1 + rng() % 8;
    } else {
      cfg.workload.hidden = 2 + rng() % 24;
      cfg.workload.layers = rng() % 3 == 0 ? 1 : 3 + 2 * (rng() % 2);
      cfg.workload.src_len = 1 + rng() % 3;
      cfg.workload.dst_len = 1 + rng() % 3;
      cfg.workload.time_steps = 1 + rng() % 2;
      cfg.workload.training = rng() % 2;
    }
    SimOptions opt;
    opt.functional = false;
    auto st = run_system(cfg, opt).stats;
    double bw = cfg.slice.mem_bandwidth_gbps() * 1e9;
    double bound = static_cast<double>(cfg.num_slices) *
                   std::min(peak_flops(cfg.slice), st.measured_intensity * bw);
    double ratio = st.achieved_flops_per_sec / bound;
    worst = std::max(worst, ratio);
    if (!(st.achieved_flops_per_sec <= bound * 1.001)) ++violations;
  }
  return {violations == 0, fmt("50 runs, %d violations, max achieved/bound %.4f (<= 1.001)", violations, worst)};
}

Outcome superlinear_scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  SystemConfig cfg;
  apply_workload_preset(cfg, "reload-heavy");
  // Narrow memory keeps Register B reloads on the critical path.
  cfg.slice.memory.kind = MemoryKind::custom;
  cfg.slice.memory.per_slice_bandwidth_gbps = 2.5;
  const std::size_t weight_rows = 2 * cfg.workload.hidden, weight_cols = 4 * cfg.workload.hidden;
  SimOptions opt;
  opt.functional = false;
  std::vector<SimStats> runs;
  for (std::size_t s : {2u, 4u, 8u, 16u}) {
    cfg.num_slices = s;
    runs.push_back(run_system(cfg, opt).stats);
  }
  // The weight exceeds one Register B load (array_rows x array_cols).
  bool ok = weight_rows * weight_cols > cfg.slice.array_rows * cfg.slice.array_cols;
  std::string detail = fmt("weight %zux%zu;", weight_rows, weight_cols);
  for (std::size_t i = 1; i < runs.size(); ++i) {
    double up = runs[i].achieved_flops_per_sec / runs[i - 1].achieved_flops_per_sec;
    bool step_ok = up >= 2.0 && runs[i].load_iterations < runs[i - 1].load_iterations;
    if (i == 1) step_ok = step_ok && up > 2.0;
    ok = ok && step_ok;
    detail += fmt(" %zu->%zu speedup %.3f loads %llu->%llu;", runs[i - 1].num_slices, runs[i].num_slices, up,
                  static_cast<unsigned long long>(runs[i - 1].load_iterations),
                  static_cast<unsigned long long>(runs[i].load_iterations));
  }
  double secs = seconds_since(t0);
  ok = ok && secs < 300.0;
  return {ok, detail + fmt(" %.1f s", secs)};
}

Outcome balanced_vs_baseline() {
  SystemConfig base;
  apply_workload_preset(base, "compute-bound");
  base.num_slices = 2;
  base.slice.compute_scale = 1.0;
  apply_memory_preset(base, MemoryKind::hmc2);
  SystemConfig bal = base;
  bal.num_slices = 1;
  bal.slice.compute_scale = 2.0;
  apply_memory_preset(bal, MemoryKind::hbm);
  const double peak_base = peak_flops(base.slice) * static_cast<double>(base.num_slices);
  const double peak_bal = peak_flops(bal.slice) * static_cast<double>(bal.num_slices);

  SimOptions opt;
  opt.functional = false;
  auto a = run_system(base, opt).stats;
  auto b = run_system(bal, opt).stats;
  double ratio = b.achieved_flops_per_sec / a.achieved_flops_per_sec;
  double da = std::abs(a.measured_intensity - roofline_knee(base.slice));
  double db = std::abs(b.measured_intensity - roofline_knee(bal.slice));
  bool ok = std::abs(peak_base - peak_bal) <= 1e-9 * peak_base && bal.slice.mem_bandwidth_gbps() <
            base.slice.mem_bandwidth_gbps() && ratio >= 0.9 && db < da;
  return {ok, fmt("throughput ratio %.3f (>= 0.9); |I - knee| %.1f -> %.1f (I %.1f/%.1f, knee %.1f/%.1f)", ratio, da,
                  db, a.measured_intensity, b.measured_intensity, roofline_knee(base.slice),
                  roofline_knee(bal.slice))};
}

Outcome energy_accounting() {
  SystemConfig cfg;
  cfg.num_slices = 4;
  cfg.workload.hidden = 8;
  double worst = 0.0;
  bool additive = true;
  SimStats by_kind[2];
  int i = 0;
  for (auto kind : {MemoryKind::hmc2, MemoryKind::hbm}) {
    apply_memory_preset(cfg, kind);
    SimOptions opt;
    opt.functional = false;
    auto st = run_system(cfg, opt).stats;
    const double pj = kind == MemoryKind::hbm ? 6.0 : 3.7;
    double expect = st.mem_bytes() * 8.0 * pj * 1e-12;
    worst = std::max(worst, std::abs(st.energy_memory_j - expect) / expect);
    double sum = st.energy_memory_j + st.energy_compute_j + st.energy_network_j;
    additive = additive && std::abs(st.energy_total_j - sum) <= 1e-15 * sum;
    by_kind[i++] = st;
  }
  // Identical counters priced under both presets.
  SystemConfig hmc = cfg, hbm = cfg;
  apply_memory_preset(hmc, MemoryKind::hmc2);
  apply_memory_preset(hbm, MemoryKind::hbm);
  const auto& c = by_kind[0];
  double e_hmc = energy_account(c.mem_bytes(), c.flops, c.flits, hmc).memory_j;
  double e_hbm = energy_account(c.mem_bytes(), c.flops, c.flits, hbm).memory_j;
  bool ok = worst <= 1e-15 && additive && e_hmc < e_hbm;
  return {ok, fmt("memory energy rel dev %.2g, components additive %s, HMC %.4g J < HBM %.4g J", worst,
                  additive ? "yes" : "no", e_hmc, e_hbm)};
}

Outcome protocol_conformance() {
  Workload w;
  auto a = w.graph.add_matrix("A", 3, 4, MatrixRole::input);
  auto b = w.graph.add_matrix("B", 4, 5, MatrixRole::weight);
  auto c = w.graph.add_matrix("C", 3, 5, MatrixRole::output);
  OpNode node;
  node.label = "C=A*B";
  node.a.parts = {a};
  node.b.parts = {b};
  node.out = {c};
  w.graph.add_node(node);
  std::mt19937_64 rng(4);
  w.initial.emplace(a, random_f(3, 4, rng));
  w.initial.emplace(b, random_f(4, 5, rng));
  SystemConfig cfg;
  cfg.num_slices = 2;
  SimOptions opt;
  opt.trace = true;
  auto r = plan_and_run(w, cfg, opt);
  auto check = r.trace.check_protocol(w.graph, true);
  std::size_t cross = 0;
  for (const auto& t : r.trace.records())
    if (t.step == Step::deliver && t.slice != t.task_slice) ++cross;
  const auto& st = r.stats;
  bool ok = check.ok && check.tasks == 2 && cross > 0 && st.partial_packets > 0 &&
            st.partial_packets_verified == st.partial_packets;
  return {ok, fmt("%zu tasks with steps 1-9 in order%s%s; %zu cross-slice deliveries; %llu/%llu packets verified",
                  check.tasks, check.ok ? "" : ": ", check.detail.c_str(), cross,
                  static_cast<unsigned long long>(st.partial_packets_verified),
                  static_cast<unsigned long long>(st.partial_packets))};
}

Outcome im2col_correctness() {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  int byte_mismatch = 0;
  for (int i = 0; i < 20; ++i) {
    ConvSpec s;
    s.seed = rng();
    s.batch = 1 + rng() % 2;
    s.channels = 1 + rng() % 3;
    s.height = 5 + rng() % 12;
    s.width = 5 + rng() % 12;
    s.kernels = 1 + rng() % 6;
    s.kernel_h = 1 + rng() % 5;
    s.kernel_w = 1 + rng() % 5;
    s.stride = 1 + rng() % 2;
    s.padding = rng() % 3;
    auto w = build_conv(s);

    // Same generator order as the workload: input tensor, then kernels.
    std::mt19937_64 gen(s.seed);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    MatrixF in(s.batch, s.channels * s.height * s.width), ker(s.kernels, s.channels * s.kernel_h * s.kernel_w);
    for (auto& v : in.data()) v = d(gen);
    for (auto& v : ker.data()) v = d(gen);

    const std::size_t oh = s.out_h(), ow = s.out_w();
    Matrix direct(s.batch * oh * ow, s.kernels);
    std::uint64_t copies = 0;
    for (std::size_t n = 0; n < s.batch; ++n)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
          for (std::size_t ch = 0; ch < s.channels; ++ch)
            for (std::size_t ky = 0; ky < s.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
                long y = long(oy * s.stride + ky) - long(s.padding);
                long x = long(ox * s.stride + kx) - long(s.padding);
                if (y < 0 || x < 0 || y >= long(s.height) || x >= long(s.width)) continue;
                ++copies;
                for (std::size_t k = 0; k < s.kernels; ++k)
                  direct((n * oh + oy) * ow + ox, k) += double(in(n, (ch * s.height + y) * s.width + x)) *
                                                        double(ker(k, (ch * s.kernel_h + ky) * s.kernel_w + kx));
              }
    SystemConfig cfg;
    cfg.num_slices = 1 + rng() % 8;
    auto r = plan_and_run(w, cfg);
    worst = std::max(worst, relative_error(r.values.at(w.graph.nodes().front().out.front()), direct));
    if (r.stats.im2col_bytes != copies * cfg.slice.element_bytes()) ++byte_mismatch;
  }
  return {worst <= 1e-3 && byte_mismatch == 0,
          fmt("20 specs, max rel err %.3g (<= 1e-3), %d byte-count mismatches", worst, byte_mismatch)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome determinism() {
  fs::path dir = fs::temp_directory_path() / ("mslice_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::string csv[2], trace[2];
  int rc = 0;
  for (int i = 0; i < 2; ++i) {
    fs::path out = dir / ("run" + std::to_string(i) + ".csv");
    std::string cmd = std::string(MSLICE_CLI_PATH) +
                      " run --slices 4 --H 6 --batch 3 --training --seed 17 --trace --out " + out.string();
    int status = std::system(cmd.c_str());
    rc |= WIFEXITED(status) ? WEXITSTATUS(status) : 1;
    csv[i] = slurp(out);
    trace[i] = slurp(out.string() + ".trace");
  }
  fs::remove_all(dir);
  bool ok = rc == 0 && !csv[0].empty() && !trace[0].empty() && csv[0] == csv[1] && trace[0] == trace[1];
  return {ok, fmt("CSV %s, trace %s (%zu bytes)", csv[0] == csv[1] ? "identical" : "differs",
                  trace[0] == trace[1] ? "identical" : "differs", trace[0].size())};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"A1 oracle equivalence", oracle_equivalence},
      {"A2 LSTM functional and gradient", lstm_functional_and_gradient},
      {"A3 roofline bound", roofline_bound},
      {"A4 superlinear scaling", superlinear_scaling},
      {"A5 balanced vs baseline", balanced_vs_baseline},
      {"A6 energy accounting", energy_accounting},
      {"A7 protocol conformance", protocol_conformance},
      {"A8 im2col correctness", im2col_correctness},
      {"A9 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
