#include "mslice/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace mslice {

void EventTrace::finalize() {
  std::stable_sort(records_.begin(), records_.end(), [](const TraceRecord& a, const TraceRecord& b) {
    return std::make_tuple(a.cycle, a.slice, static_cast<unsigned>(a.step), a.node, a.task_slice) <
           std::make_tuple(b.cycle, b.slice, static_cast<unsigned>(b.step), b.node, b.task_slice);
  });
}

std::string EventTrace::to_text() const {
  std::string out;
  char buf[96];
  for (const auto& r : records_) {
    std::snprintf(buf, sizeof buf, "%.0f %u %u %u:%u\n", std::ceil(r.cycle), r.slice, static_cast<unsigned>(r.step),
                  r.node, r.task_slice);
    out += buf;
  }
  return out;
}

EventTrace::Check EventTrace::check_protocol(const OpGraph& graph, bool complete) const {
  constexpr double missing = std::numeric_limits<double>::infinity();
  std::map<std::pair<NodeId, SliceId>, std::array<double, 10>> first;
  for (const auto& r : records_) {
    auto [it, fresh] = first.try_emplace({r.node, r.task_slice});
    if (fresh) it->second.fill(missing);
    auto& slot = it->second[static_cast<unsigned>(r.step)];
    slot = std::min(slot, r.cycle);
  }
  Check c;
  c.tasks = first.size();
  for (const auto& [task, steps] : first) {
    const bool matmul = graph.node(task.first).is_matmul();
    double prev = -missing;
    unsigned prev_step = 0;
    for (unsigned s = 1; s <= 9; ++s) {
      if (steps[s] == missing) {
        if (complete && matmul) {
          c.ok = false;
          c.detail = "task " + std::to_string(task.first) + "@" + std::to_string(task.second) + " lacks step " +
                     std::to_string(s);
          return c;
        }
        continue;
      }
      if (steps[s] < prev) {
        c.ok = false;
        c.detail = "task " + std::to_string(task.first) + "@" + std::to_string(task.second) + ": step " +
                   std::to_string(s) + " before step " + std::to_string(prev_step);
        return c;
      }
      prev = steps[s];
      prev_step = s;
    }
  }
  return c;
}

EnergyBreakdown energy_account(double mem_bytes, double flops, std::uint64_t flits, const SystemConfig& cfg) {
  EnergyBreakdown e;
  e.memory_j = mem_bytes * 8.0 * cfg.slice.mem_energy_pj_per_bit() * 1e-12;
  e.compute_j = flops * cfg.slice.flop_energy_pj * 1e-12;
  e.network_j = static_cast<double>(flits) * cfg.icn.flit_width * cfg.icn.energy_pj_per_bit * 1e-12;
  e.total_j = e.memory_j + e.compute_j + e.network_j;
  return e;
}

namespace {

/// Rectangle in a stored matrix's own coordinates.
struct Rect {
  MatrixId matrix = kNoMatrix;
  IndexRange rows, cols;
  std::size_t area() const noexcept { return rows.size() * cols.size(); }
};

IndexRange intersect(IndexRange a, IndexRange b) {
  std::size_t lo = std::max(a.begin, b.begin), hi = std::min(a.end, b.end);
  return lo < hi ? IndexRange{lo, hi} : IndexRange{lo, lo};
}

/// Stored rectangles covering a logical rectangle of an operand.
std::vector<Rect> stored_rects(const OpGraph& g, const Operand& op, IndexRange rows, IndexRange cols) {
  if (op.transposed) std::swap(rows, cols);
  std::vector<Rect> out;
  std::size_t offset = 0;
  for (auto part : op.parts) {
    const auto& d = g.matrix(part);
    IndexRange c = intersect(cols, {offset, offset + d.cols});
    offset += d.cols;
    if (c.size() == 0 || rows.size() == 0) continue;
    IndexRange local{c.begin - (offset - d.cols), c.end - (offset - d.cols)};
    if (d.view_of)
      out.push_back({*d.view_of, local, rows});
    else
      out.push_back({part, rows, local});
  }
  return out;
}

/// Copies a logical rectangle of an operand out of the value store.
MatrixF gather(const OpGraph& g, const std::vector<MatrixF>& store, const Operand& op, IndexRange rows,
               IndexRange cols) {
  MatrixF out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      auto e = g.resolve(op, rows.begin + r, cols.begin + c);
      out(r, c) = store[e.matrix](e.row, e.col);
    }
  return out;
}

struct Residency {
  bool valid = false;
  std::vector<MatrixId> parts;
  bool transposed = false;
  std::uint64_t version = 0;
  std::size_t k0 = 0, ni = 0, ci = 0;
  bool operator==(const Residency&) const = default;
};

struct SliceState {
  MemoryChannel mem;
  double seq_free = 0.0;  // task sequencer / multiplier array
  double agg_free = 0.0;  // aggregation engine
  double busy = 0.0;
  double array_drained = 0.0;  // last result left the array
  std::uint64_t waves = 0, loads = 0;
  Residency resident;
};

/// Running sums of one matmul output while partials arrive.
struct Accumulator {
  MatrixF sum;
  std::vector<std::uint16_t> received;
};

class Engine {
 public:
  Engine(const Workload& w, const GraphPlan& plan, const SystemConfig& cfg, const SimOptions& opt)
      : w_(w), g_(w.graph), plan_(plan), cfg_(cfg), opt_(opt), net_(cfg.icn, plan.num_slices) {
    eb_ = static_cast<double>(cfg.slice.element_bytes());
    for (std::size_t s = 0; s < plan.num_slices; ++s)
      slices_.push_back(SliceState{MemoryChannel(cfg.slice.bytes_per_cycle()), 0, 0, 0, 0, 0, 0, {}});
    version_.assign(g_.matrices().size(), 0);
    node_left_.assign(g_.nodes().size(), 0);
    node_finish_.assign(g_.nodes().size(), 0.0);
    for (const auto& prog : plan.program)
      for (auto id : prog) ++node_left_.at(id);
    if (opt_.functional) {
      store_.resize(g_.matrices().size());
      for (const auto& d : g_.matrices())
        if (!d.view_of) store_[d.id] = MatrixF(d.rows, d.cols);
      for (const auto& [id, m] : w.initial) store_.at(id) = m;
    }
  }

  SimResult run();

 private:
  void record(double cycle, SliceId slice, Step step, NodeId node, SliceId task_slice) {
    if (opt_.trace) trace_.add(cycle, slice, step, node, task_slice);
  }
  unsigned packet_flits(std::size_t count) const {
    return 1 + payload_flits(count, cfg_.slice.element_width, cfg_.icn.flit_width);
  }
  std::uint64_t version_of(const std::vector<MatrixId>& parts) const {
    std::uint64_t v = 0;
    for (auto p : parts) v += version_[g_.matrix(p).view_of.value_or(p)];
    return v;
  }

  void programming();
  void lowering();
  double fetch(const Rect& rect, SliceId dst, double t0, bool land = true, double* remote_bytes = nullptr);
  double forward(const Operand& op, IndexRange rows, IndexRange cols, SliceId dst, double t0);
  double scatter(SliceId src, const Rect& region, SliceId dst, double t0, bool from_memory = true,
                 bool land = true);
  void run_matmul(NodeId id, SliceId s, double t0);
  void emit_partials(NodeId id, const PartitionPlan& pp, SliceId s, std::size_t c0, std::size_t width, double t,
                     const MatrixF* partial);
  void run_elementwise(NodeId id, SliceId s, double t0);
  void compute_elementwise(const OpNode& n);
  void complete_task(NodeId id);
  SimStats finish();

  const Workload& w_;
  const OpGraph& g_;
  const GraphPlan& plan_;
  const SystemConfig& cfg_;
  SimOptions opt_;
  double eb_ = 2.0;
  std::vector<SliceState> slices_;
  Network net_;
  std::vector<MatrixF> store_;
  std::vector<std::uint64_t> version_;
  std::vector<std::size_t> node_left_;
  std::vector<double> node_finish_;
  std::map<NodeId, Accumulator> acc_;
  EventTrace trace_;
  double read_ = 0.0, write_ = 0.0, flops_ = 0.0;
  std::uint64_t next_packet_ = 0;
  std::uint64_t partial_packets_ = 0, verified_ = 0, aggregations_ = 0;
  std::uint64_t prog_packets_ = 0, prog_flits_ = 0;
};

SimResult Engine::run() {
  programming();
  lowering();
  std::vector<std::size_t> pos(slices_.size(), 0);
  std::size_t remaining = 0;
  for (const auto& prog : plan_.program) remaining += prog.size();
  while (remaining > 0) {
    double best_start = std::numeric_limits<double>::infinity();
    SliceId best = 0;
    bool found = false;
    for (SliceId s = 0; s < slices_.size(); ++s) {
      const auto& prog = plan_.program[s];
      if (pos[s] >= prog.size()) continue;
      const auto& n = g_.node(prog[pos[s]]);
      double start = slices_[s].seq_free;
      bool ready = true;
      for (auto d : n.deps) {
        if (node_left_[d] != 0) {
          ready = false;
          break;
        }
        start = std::max(start, node_finish_[d]);
      }
      if (ready && start < best_start) {
        best_start = start;
        best = s;
        found = true;
      }
    }
    if (!found) {
      std::ostringstream os;
      os << "deadlock: no runnable task with " << remaining << " remaining;";
      for (SliceId s = 0; s < slices_.size(); ++s) {
        if (pos[s] >= plan_.program[s].size()) continue;
        const auto& n = g_.node(plan_.program[s][pos[s]]);
        os << " slice " << s << " waits at '" << n.label << "' for";
        for (auto d : n.deps)
          if (node_left_[d] != 0) os << " '" << g_.node(d).label << "'";
        os << ";";
      }
      throw SimError(os.str());
    }
    NodeId id = plan_.program[best][pos[best]++];
    if (g_.node(id).is_matmul())
      run_matmul(id, best, best_start);
    else
      run_elementwise(id, best, best_start);
    complete_task(id);
    --remaining;
  }
  SimResult r;
  r.stats = finish();
  if (opt_.trace) {
    trace_.finalize();
    r.trace = std::move(trace_);
  }
  if (opt_.functional)
    for (const auto& d : g_.matrices())
      if (!d.view_of) r.values.emplace(d.id, std::move(store_[d.id]));
  return r;
}

void Engine::complete_task(NodeId id) {
  if (--node_left_[id] != 0) return;
  const auto& n = g_.node(id);
  if (!n.is_matmul()) return;
  const auto& pp = plan_.matmuls.at(id);
  if (n.post != PostOp::none) flops_ += flop_cost::post_op * static_cast<double>(pp.m * pp.n);
  auto it = acc_.find(id);
  std::size_t done = 0;
  if (it != acc_.end())
    for (auto c : it->second.received) done += c == pp.fan_in;
  if (done != pp.m * pp.n)
    throw SimError("node '" + n.label + "' finished with " + std::to_string(done) + " of " +
                   std::to_string(pp.m * pp.n) + " outputs aggregated");
  acc_.erase(id);
}

// Configuration packets: one per PMI entry, sent from slice 0 before
// execution on an otherwise idle network. Counted separately.
void Engine::programming() {
  Network prog(cfg_.icn, plan_.num_slices);
  for (SliceId s = 0; s < plan_.num_slices; ++s)
    for (std::size_t i = 0; i < plan_.pmi.entries(s).size(); ++i) {
      const unsigned flits = 2;
      if (s != 0) prog.send(0, s, flits, 0.0);
      ++prog_packets_;
      prog_flits_ += flits;
    }
}

// im2col duplicates are written by the memory interface of the slice that
// holds the lowered matrix before anything runs.
void Engine::lowering() {
  if (w_.lowering_bytes == 0 || w_.lowered_matrix == kNoMatrix) return;
  auto placed = plan_.pmi.placements(w_.lowered_matrix, Orientation::forward);
  SliceId home = placed.empty() ? 0 : placed.front().slice;
  auto& sl = slices_[home];
  double bytes = static_cast<double>(w_.lowering_bytes);
  double f = sl.mem.transfer(0.0, bytes);
  write_ += bytes;
  sl.seq_free = std::max(sl.seq_free, f);
}

// Moves one stored region from `src` to `dst`: read at the source, row-run
// packets over the mesh, write at the destination. Returns the time the
// region is in the destination memory.
double Engine::scatter(SliceId src, const Rect& region, SliceId dst, double t0, bool from_memory, bool land) {
  const double bytes = static_cast<double>(region.area()) * eb_;
  double read_done = t0;
  if (from_memory) {
    read_done = slices_[src].mem.transfer(t0, bytes);
    read_ += bytes;
  }
  const std::size_t cap = std::max<std::size_t>(1, cfg_.icn.max_payload);
  double first = std::numeric_limits<double>::infinity(), last = read_done;
  for (std::size_t r = region.rows.begin; r < region.rows.end; ++r)
    for (std::size_t c = region.cols.begin; c < region.cols.end; c += cap) {
      std::size_t cnt = std::min(cap, region.cols.end - c);
      auto dv = net_.send(src, dst, packet_flits(cnt), read_done, next_packet_++);
      first = std::min(first, dv.delivered);
      last = std::max(last, dv.delivered);
    }
  if (region.area() == 0) return t0;
  if (!land) return last;
  double w = slices_[dst].mem.transfer(first, bytes);
  write_ += bytes;
  return std::max(last, w);
}

double Engine::fetch(const Rect& rect, SliceId dst, double t0, bool land, double* remote_bytes) {
  if (rect.area() == 0) return t0;
  for (auto orient : {Orientation::forward, Orientation::transposed}) {
    std::size_t covered = 0;
    for (const auto& p : plan_.pmi.placements(rect.matrix, orient))
      if (p.slice == dst)
        covered += intersect(rect.rows, p.entry->rows).size() * intersect(rect.cols, p.entry->cols).size();
    if (covered == rect.area()) return t0;
  }
  auto placed = plan_.pmi.placements(rect.matrix, Orientation::forward);
  if (placed.empty()) placed = plan_.pmi.placements(rect.matrix, Orientation::transposed);
  if (placed.empty()) throw SimError("matrix '" + g_.matrix(rect.matrix).name + "' has no memory placement");
  double ready = t0;
  for (const auto& p : placed) {
    if (p.slice == dst) continue;
    Rect part{rect.matrix, intersect(rect.rows, p.entry->rows), intersect(rect.cols, p.entry->cols)};
    if (part.area() == 0) continue;
    ready = std::max(ready, scatter(p.slice, part, dst, t0, true, land));
    if (remote_bytes) *remote_bytes += static_cast<double>(part.area()) * eb_;
  }
  return ready;
}

double Engine::forward(const Operand& op, IndexRange rows, IndexRange cols, SliceId dst, double t0) {
  double ready = t0;
  for (const auto& r : stored_rects(g_, op, rows, cols)) ready = std::max(ready, fetch(r, dst, t0));
  return ready;
}

void Engine::run_matmul(NodeId id, SliceId s, double t0) {
  const auto& n = g_.node(id);
  const auto& pp = plan_.matmuls.at(id);
  std::size_t idx = pp.b_parts.size();
  for (std::size_t i = 0; i < pp.b_parts.size(); ++i)
    if (pp.b_parts[i].slice == s) idx = i;
  if (idx == pp.b_parts.size()) throw SimError("node '" + n.label + "' has no slab on slice " + std::to_string(s));
  const IndexRange slab = pp.k_slabs[idx];
  const std::size_t m = pp.m, ncols = pp.n, ks = slab.size();
  for (auto o : n.out) ++version_[o];

  double t = std::max(forward(n.a, {0, m}, slab, s, t0), forward(n.b, slab, {0, ncols}, s, t0));

  MatrixF partial;
  if (opt_.functional) {
    MatrixF a = gather(g_, store_, n.a, {0, m}, slab);
    MatrixF b = gather(g_, store_, n.b, slab, {0, ncols});
    partial = slab_product(a, b, cfg_.slice.array_cols);
  }

  const auto& sc = cfg_.slice;
  const std::size_t R = sc.effective_rows(), C = sc.array_cols;
  const std::size_t nt = (ncols + R - 1) / R, kt = (ks + C - 1) / C;
  std::vector<std::pair<std::size_t, std::size_t>> tiles;
  tiles.reserve(nt * kt);
  for (std::size_t ni = 0; ni < nt; ++ni)
    for (std::size_t j = 0; j < kt; ++j) tiles.emplace_back(ni, ni % 2 == 0 ? j : kt - 1 - j);

  auto& sl = slices_[s];
  Residency key{true, n.b.parts, n.b.transposed, version_of(n.b.parts), slab.begin, 0, 0};
  auto keyed = [&](std::pair<std::size_t, std::size_t> tile) {
    Residency k = key;
    k.ni = tile.first;
    k.ci = tile.second;
    return k;
  };
  // Snake order: start from whichever end of the sequence is still loaded.
  if (tiles.size() > 1 && sl.resident == keyed(tiles.back())) std::reverse(tiles.begin(), tiles.end());

  // Tiles are pipelined: the next Register B tile is staged from memory
  // while the current one streams, rows reload as the last A row passes
  // them, and the next A stream enters right behind. Drain is paid once.
  const double mult = sc.mult_latency, adder = sc.adder_tree_latency;
  double stage_free = t;  // staging buffer for the next B tile
  double enter_free = t;  // top of the array accepts the next A row
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    auto [ni, ci] = tiles[i];
    const std::size_t nr = std::min(R, ncols - ni * R), kc = std::min(C, ks - ci * C);
    record(stage_free, s, Step::preload, id, s);
    double ready = enter_free;
    Residency k = keyed(tiles[i]);
    if (!(sl.resident == k)) {
      double bytes = static_cast<double>(kc * nr) * eb_;
      double f = sl.mem.transfer(stage_free, bytes);
      read_ += bytes;
      ready = std::max({ready, f, stage_free + preload_fill_cycles(sc, nr)});
      ++sl.loads;
      sl.resident = k;
    }
    const double interval = wave_interval(sc, kc);
    const double a_bytes = static_cast<double>(m * kc) * eb_;
    const double a_done = sl.mem.transfer(ready, a_bytes);
    read_ += a_bytes;
    const std::size_t depth = std::min(nr, sc.array_rows);
    const double last_enter = std::max(ready + static_cast<double>(m - 1) * interval, a_done - interval);
    const double end =
        std::max(ready + stream_cycles(sc, m, kc, nr), last_enter + mult + adder + static_cast<double>(depth - 1) * mult);
    record(ready, s, Step::stream, id, s);
    record(ready + mult, s, Step::multiply, id, s);
    record(ready + mult + adder, s, Step::adder, id, s);
    sl.busy += std::max(0.0, end - std::max(ready, sl.array_drained));
    sl.array_drained = std::max(sl.array_drained, end);
    sl.waves += m + depth - 1;
    flops_ += 2.0 * static_cast<double>(m * nr * kc);
    stage_free = ready;
    enter_free = last_enter + interval;
    if (i + 1 == tiles.size() || tiles[i + 1].first != ni)
      emit_partials(id, pp, s, ni * R, nr, end, opt_.functional ? &partial : nullptr);
  }
  sl.seq_free = enter_free;
}

void Engine::emit_partials(NodeId id, const PartitionPlan& pp, SliceId s, std::size_t c0, std::size_t width, double t,
                           const MatrixF* partial) {
  const auto& n = g_.node(id);
  const std::size_t cap = std::max<std::size_t>(1, cfg_.icn.max_payload);
  const std::size_t C = cfg_.slice.array_cols;
  const std::size_t end_col = c0 + width;
  Accumulator& acc = acc_[id];
  if (acc.received.empty()) acc.received.assign(pp.m * pp.n, 0);
  if (partial && acc.sum.rows() == 0) acc.sum = MatrixF(pp.m, pp.n);
  record(t, s, Step::packetize, id, s);
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (std::size_t r = 0; r < pp.m; ++r) {
    std::size_t c = c0;
    while (c < end_col) {
      const SliceId o = pp.owner_of_column(c);
      std::size_t e = c + 1;
      while (e < end_col && e - c < cap && pp.owner_of_column(e) == o) ++e;
      const std::size_t cnt = e - c;
      double arrive = t + 1.0;  // local port
      if (o != s) arrive = net_.send(s, o, packet_flits(cnt), t, next_packet_++).delivered;
      record(t, s, Step::inject, id, s);
      record(arrive, o, Step::deliver, id, s);
      ++partial_packets_;

      // The aggregation engine accumulates in its buffer; an element goes to
      // memory once, when its last partial has arrived.
      auto& os = slices_[o];
      const double start = std::max(arrive, os.agg_free);
      os.agg_free = start + std::ceil(static_cast<double>(cnt) / static_cast<double>(C));
      record(start, o, Step::aggregate, id, s);
      aggregations_ += cnt;

      Packet pk;
      if (partial) {
        pk.src = s;
        pk.dst = o;
        pk.matrix = n.out.front();
        pk.first_row = r;
        pk.first_col = c;
        pk.count = cnt;
        pk.pattern = IndexPattern::row;
        for (std::size_t j = c; j < e; ++j) pk.payload.push_back((*partial)(r, j));
        idx = reconstruct_indices(pk);
        bool ok = idx.size() == cnt;
        for (std::size_t i = 0; ok && i < cnt; ++i) ok = idx[i] == std::make_pair(r, c + i);
        verified_ += ok;
      }
      std::size_t finals = 0;
      for (std::size_t i = 0; i < cnt; ++i) {
        auto [rr, cc] = partial ? idx.at(i) : std::make_pair(r, c + i);
        auto& got = acc.received[rr * pp.n + cc];
        if (++got > pp.fan_in)
          throw SimError("node '" + n.label + "': element (" + std::to_string(rr) + ", " + std::to_string(cc) +
                         ") received more than " + std::to_string(pp.fan_in) + " partials");
        if (partial) acc.sum(rr, cc) += pk.payload[i];
        if (got == pp.fan_in) {
          ++finals;
          if (partial) {
            auto el = g_.resolve_output(n, rr, cc);
            store_[el.matrix](el.row, el.col) = apply_post_op(n.post, acc.sum(rr, cc), cc, pp.n);
          }
        }
      }
      double done = os.agg_free;
      if (finals > 0) {
        const double bytes = eb_ * static_cast<double>(finals);
        done = std::max(done, os.mem.transfer(os.agg_free, bytes));
        write_ += bytes;
        // Every slab contributes to every element, so the write completes
        // each contributing task's protocol.
        for (const auto& bp : pp.b_parts) record(done, o, Step::writeback, id, bp.slice);
      }
      node_finish_[id] = std::max(node_finish_[id], done);
      c = e;
    }
  }
}

void Engine::run_elementwise(NodeId id, SliceId s, double t0) {
  const auto& n = g_.node(id);
  double t = t0, in_bytes = 0.0;
  for (auto in : n.inputs) {
    if (in == kNoMatrix) continue;
    const auto& d = g_.matrix(g_.matrix(in).view_of.value_or(in));
    Rect r{d.id, {0, d.rows}, {0, d.cols}};
    // Remote inputs stream straight into the aggregation engine.
    double remote = 0.0;
    t = std::max(t, fetch(r, s, t0, false, &remote));
    in_bytes += static_cast<double>(r.area()) * eb_ - remote;
  }
  auto& sl = slices_[s];
  const double start = std::max(t, sl.agg_free);
  const double f = sl.mem.transfer(start, in_bytes);
  read_ += in_bytes;
  record(start, s, Step::aggregate, id, s);
  if (opt_.functional) compute_elementwise(n);
  flops_ += g_.node_flops(n);

  double local = f, done = f;
  for (auto o : n.out) {
    ++version_[o];
    for (auto orient : {Orientation::forward, Orientation::transposed})
      for (const auto& p : plan_.pmi.placements(o, orient)) {
        Rect region{o, p.entry->rows, p.entry->cols};
        if (p.slice == s) {
          const double bytes = static_cast<double>(region.area()) * eb_;
          local = std::max(local, sl.mem.transfer(f, bytes));
          write_ += bytes;
        } else {
          done = std::max(done, scatter(s, region, p.slice, f, false));
        }
      }
  }
  sl.agg_free = local;
  sl.seq_free = std::max(sl.seq_free, start);
  done = std::max(done, local);
  record(done, s, Step::writeback, id, s);
  node_finish_[id] = std::max(node_finish_[id], done);
}

void Engine::compute_elementwise(const OpNode& n) {
  auto in = [&](std::size_t i) -> const MatrixF& { return store_.at(n.inputs.at(i)); };
  switch (n.op) {
    case ElementwiseOp::lstm_cell: {
      const MatrixF& gates = in(0);
      const MatrixF& cp = in(1);
      const std::size_t H = cp.cols();
      MatrixF h(cp.rows(), H), c(cp.rows(), H);
      for (std::size_t r = 0; r < cp.rows(); ++r)
        for (std::size_t j = 0; j < H; ++j) {
          float i = gates(r, j), f = gates(r, H + j), g = gates(r, 2 * H + j), o = gates(r, 3 * H + j);
          c(r, j) = f * cp(r, j) + i * g;
          h(r, j) = o * std::tanh(c(r, j));
        }
      store_[n.out.at(0)] = std::move(h);
      store_[n.out.at(1)] = std::move(c);
      break;
    }
    case ElementwiseOp::lstm_cell_backward: {
      const MatrixF& gates = in(0);
      const MatrixF& cp = in(1);
      const MatrixF& cc = in(2);
      const bool has_dc = n.inputs.at(3) != kNoMatrix;
      const std::size_t H = cp.cols();
      MatrixF dz(cp.rows(), 4 * H), dcp(cp.rows(), H);
      for (std::size_t r = 0; r < cp.rows(); ++r)
        for (std::size_t j = 0; j < H; ++j) {
          float dh = 0.0f;
          for (std::size_t k = 4; k < n.inputs.size(); ++k) dh += in(k)(r, j);
          float i = gates(r, j), f = gates(r, H + j), g = gates(r, 2 * H + j), o = gates(r, 3 * H + j);
          float tc = std::tanh(cc(r, j));
          float dct = (has_dc ? in(3)(r, j) : 0.0f) + dh * o * (1.0f - tc * tc);
          dz(r, j) = dct * g * i * (1.0f - i);
          dz(r, H + j) = dct * cp(r, j) * f * (1.0f - f);
          dz(r, 2 * H + j) = dct * i * (1.0f - g * g);
          dz(r, 3 * H + j) = dh * tc * o * (1.0f - o);
          dcp(r, j) = dct * f;
        }
      store_[n.out.at(0)] = std::move(dz);
      store_[n.out.at(1)] = std::move(dcp);
      break;
    }
    case ElementwiseOp::tanh_backward: {
      const MatrixF& a = in(0);
      MatrixF d(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t j = 0; j < a.cols(); ++j) {
          float da = 0.0f;
          for (std::size_t k = 1; k < n.inputs.size(); ++k) da += in(k)(r, j);
          d(r, j) = da * (1.0f - a(r, j) * a(r, j));
        }
      store_[n.out.at(0)] = std::move(d);
      break;
    }
    case ElementwiseOp::loss_grad: {
      const MatrixF& h = in(0);
      const MatrixF& y = in(1);
      MatrixF d(h.rows(), h.cols());
      for (std::size_t r = 0; r < h.rows(); ++r)
        for (std::size_t j = 0; j < h.cols(); ++j) d(r, j) = h(r, j) - y(r, j);
      store_[n.out.at(0)] = std::move(d);
      break;
    }
    case ElementwiseOp::sgd: {
      MatrixF& w = store_.at(n.out.at(0));
      const MatrixF& grad = in(1);
      const float eta = static_cast<float>(n.eta);
      for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t j = 0; j < w.cols(); ++j) w(r, j) -= eta * grad(r, j);
      break;
    }
    case ElementwiseOp::none: break;
  }
}

SimStats Engine::finish() {
  SimStats st;
  st.num_slices = slices_.size();
  double total = 0.0;
  for (double f : node_finish_) total = std::max(total, f);
  for (const auto& sl : slices_) total = std::max({total, sl.seq_free, sl.agg_free, sl.array_drained});
  total = std::ceil(total);
  st.total_cycles = total;
  st.flops = flops_;
  st.mem_read_bytes = read_;
  st.mem_write_bytes = write_;
  const auto& ns = net_.stats();
  st.packets = ns.packets;
  st.flits = ns.flits;
  st.mean_packet_latency = ns.mean_latency();
  st.max_packet_latency = ns.max_latency;
  st.peak_link_utilization = total > 0.0 ? ns.max_link_flits / total : 0.0;
  auto e = energy_account(st.mem_bytes(), flops_, ns.flits, cfg_);
  st.energy_memory_j = e.memory_j;
  st.energy_compute_j = e.compute_j;
  st.energy_network_j = e.network_j;
  st.energy_total_j = e.total_j;
  st.achieved_flops_per_sec = total > 0.0 ? flops_ * cfg_.slice.clock_ghz * 1e9 / total : 0.0;
  st.achieved_flops_per_joule = e.total_j > 0.0 ? flops_ / e.total_j : 0.0;
  double util = 0.0;
  for (const auto& sl : slices_) {
    const double u = total > 0.0 ? sl.busy / total : 0.0;
    st.utilization.push_back(u);
    util += u;
    st.load_iterations += sl.loads;
    st.waves += sl.waves;
  }
  st.mean_utilization = slices_.empty() ? 0.0 : util / static_cast<double>(slices_.size());
  st.intensity = g_.empty() ? 0.0 : intensity(g_);
  st.measured_intensity = st.mem_bytes() > 0.0 ? flops_ / st.mem_bytes() : 0.0;
  st.roofline_bound =
      static_cast<double>(slices_.size()) * roofline_attainable(cfg_.slice, st.measured_intensity);
  st.programming_packets = prog_packets_;
  st.programming_flits = prog_flits_;
  st.im2col_bytes = w_.lowering_bytes;
  st.partial_packets = partial_packets_;
  st.partial_packets_verified = verified_;
  st.aggregations = aggregations_;
  return st;
}
}  // namespace

SimResult simulate(const Workload& workload, const GraphPlan& plan, const SystemConfig& cfg,
                   const SimOptions& options) {
  validate(cfg);
  if (plan.program.size() != plan.num_slices) throw SimError("plan has no program for every slice");
  return Engine(workload, plan, cfg, options).run();
}

SimResult run_system(const SystemConfig& cfg, const SimOptions& options) {
  validate(cfg);
  Workload w = build_workload(cfg);
  GraphPlan plan = plan_graph(w.graph, cfg.num_slices, cfg.slice, {cfg.dual_mapping, cfg.slice_capacity_bytes});
  return simulate(w, plan, cfg, options);
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "num_slices" || name == "slices") return SweepAxis::num_slices;
  if (name == "compute_scale") return SweepAxis::compute_scale;
  if (name == "memory" || name == "mem") return SweepAxis::memory;
  throw ConfigError("unknown sweep axis '" + name + "' (num_slices, compute_scale, memory)");
}

namespace {

SystemConfig with_value(const SystemConfig& base, SweepAxis axis, const std::string& value, double& key) {
  SystemConfig cfg = base;
  try {
    switch (axis) {
      case SweepAxis::num_slices: {
        std::size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size() || v < 1) throw ConfigError("");
        cfg.num_slices = static_cast<std::size_t>(v);
        key = static_cast<double>(v);
        break;
      }
      case SweepAxis::compute_scale: {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw ConfigError("");
        cfg.slice.compute_scale = v;
        key = v;
        break;
      }
      case SweepAxis::memory: {
        auto kind = parse_memory_kind(value);
        if (!kind || *kind == MemoryKind::custom) throw ConfigError("");
        apply_memory_preset(cfg, *kind);
        key = cfg.slice.mem_bandwidth_gbps();
        break;
      }
    }
  } catch (const std::logic_error&) {
    throw ConfigError("bad sweep value '" + value + "'");
  } catch (const ConfigError&) {
    throw ConfigError("bad sweep value '" + value + "'");
  }
  validate(cfg);
  return cfg;
}

}  // namespace

std::vector<SweepRow> sweep(const SystemConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                            const SimOptions& options) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<std::pair<double, SweepRow>> keyed;
  for (const auto& v : values) {
    double key = 0.0;
    SweepRow row;
    row.value = v;
    row.config = with_value(base, axis, v, key);
    keyed.emplace_back(key, std::move(row));
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::future<SimStats>> runs;
  for (auto& [key, row] : keyed)
    runs.push_back(std::async(std::launch::async, [cfg = row.config, options] {
      SimOptions o = options;
      o.trace = false;
      return run_system(cfg, o).stats;
    }));
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    SweepRow row = std::move(keyed[i].second);
    try {
      row.stats = runs[i].get();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  const SweepRow* ref = nullptr;
  for (const auto& r : rows)
    if (r.error.empty()) {
      ref = &r;
      break;
    }
  for (auto& r : rows)
    if (ref && r.error.empty() && ref->stats.achieved_flops_per_sec > 0.0)
      r.speedup = r.stats.achieved_flops_per_sec / ref->stats.achieved_flops_per_sec;
  return rows;
}

}  // namespace mslice
