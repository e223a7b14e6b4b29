#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("mslice_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

int cli(const std::string& args) {
  std::string cmd = std::string(MSLICE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string l;
  while (std::getline(ss, l)) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

constexpr const char* kHeader =
    "fingerprint,workload,num_slices,preset,compute_scale,mem_bandwidth_gbps,total_cycles,flops,"
    "mem_read_bytes,mem_write_bytes,packets,flits,mean_packet_latency,max_packet_latency,"
    "peak_link_utilization,energy_memory_j,energy_compute_j,energy_network_j,energy_total_j,"
    "achieved_flops_per_sec,achieved_flops_per_joule,mean_utilization,load_iterations,intensity,"
    "measured_intensity,roofline_bound,programming_packets,programming_flits";

}  // namespace

TEST_CASE("exit codes") {
  CHECK(cli("--help") == 0);
  CHECK(cli("") == 2);
  CHECK(cli("run --no-such-flag") == 2);
  CHECK(cli("run --slices 0") == 2);
  CHECK(cli("run --preset ddr4") == 2);
  CHECK(cli("run --config /nonexistent/x.cfg") == 2);
  CHECK(cli("sweep --axis depth --values 1") == 2);
  CHECK(cli("run --layers 2") == 2);
}

TEST_CASE("run writes a CSV row within the roofline") {
  Scratch s;
  auto out = s.dir / "run.csv";
  REQUIRE(cli("run --preset hbm --workload translator --H 4 --batch 4 --slices 4 --out " + out.string()) == 0);
  auto ls = lines(slurp(out));
  REQUIRE(ls.size() == 2);
  CHECK(ls[0] == kHeader);
  auto head = fields(ls[0]);
  auto row = fields(ls[1]);
  REQUIRE(row.size() == head.size());
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < head.size(); ++i)
      if (head[i] == name) return row[i];
    return std::string();
  };
  CHECK(col("preset") == "hbm");
  CHECK(col("num_slices") == "4");
  CHECK(std::stod(col("achieved_flops_per_sec")) <= std::stod(col("roofline_bound")) * 1.001);
}

TEST_CASE("trace file") {
  Scratch s;
  auto out = s.dir / "r.csv";
  REQUIRE(cli("run --slices 2 --trace --out " + out.string()) == 0);
  auto trace = s.dir / "r.csv.trace";
  REQUIRE(fs::exists(trace));
  auto ls = lines(slurp(trace));
  CHECK_FALSE(ls.empty());

  // Per task, the first occurrence of each step never precedes an earlier step.
  std::map<std::string, std::vector<double>> first;
  for (const auto& l : ls) {
    std::stringstream ss(l);
    double cycle;
    int slice, step;
    std::string task;
    ss >> cycle >> slice >> step >> task;
    auto& f = first[task];
    if (f.empty()) f.assign(10, -1.0);
    if (f[step] < 0) f[step] = cycle;
  }
  for (const auto& [task, f] : first) {
    double last = 0;
    for (int step = 1; step <= 9; ++step) {
      if (f[step] < 0) continue;
      CAPTURE(task);
      CHECK(f[step] >= last);
      last = f[step];
    }
  }

  auto explicit_path = s.dir / "t.txt";
  REQUIRE(cli("run --slices 2 --out " + (s.dir / "x.csv").string() + " --trace-file " + explicit_path.string()) == 0);
  CHECK(slurp(explicit_path) == slurp(trace));
}

TEST_CASE("output directory from the environment") {
  Scratch s;
  std::string env = "MSLICE_OUT_DIR=" + s.dir.string() + " ";
  std::string cmd = env + MSLICE_CLI_PATH + " plan --slices 2 >/dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(s.dir / "plan.txt"));
  CHECK(slurp(s.dir / "plan.txt").rfind("slices 2", 0) == 0);
}

TEST_CASE("sweep and roofline") {
  Scratch s;
  auto sw = s.dir / "sweep.csv";
  REQUIRE(cli("sweep --axis num_slices --values 4 --out " + sw.string()) == 0);
  auto ls = lines(slurp(sw));
  REQUIRE(ls.size() == 2);
  CHECK(ls[0] == std::string(kHeader) + ",speedup");
  CHECK(fields(ls[1]).back() == "1");

  auto rf = s.dir / "roof.csv";
  REQUIRE(cli("roofline --min-intensity 0 --max-intensity 1000 --points 5 --out " + rf.string()) == 0);
  auto rl = lines(slurp(rf));
  REQUIRE(rl.size() >= 6);
  auto zero = fields(rl[1]);
  CHECK(std::stod(zero[0]) == 0.0);
  CHECK(std::stod(zero[1]) == 0.0);
}

TEST_CASE("config file") {
  Scratch s;
  auto cfg = s.dir / "c.cfg";
  std::ofstream(cfg) << "memory: HBM\n[system]\nnum_slices = 3\n";
  auto out = s.dir / "o.csv";
  REQUIRE(cli("run --config " + cfg.string() + " --out " + out.string()) == 0);
  auto row = fields(lines(slurp(out)).at(1));
  CHECK(row[2] == "3");
  CHECK(row[3] == "hbm");
}
