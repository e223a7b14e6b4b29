#include "mslice/partitioner.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace mslice {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::string range_str(const IndexRange& r) {
  return "[" + std::to_string(r.begin) + "," + std::to_string(r.end) + ")";
}

}  // namespace

std::size_t PartitionPlan::total_load_iterations() const {
  std::size_t total = 0;
  for (const auto& p : b_parts) total += p.load_iterations;
  return total;
}

std::size_t preload_iterations(std::size_t k_span, std::size_t n_span, const SliceConfig& cfg) {
  if (k_span == 0 || n_span == 0) return 0;
  return ceil_div(k_span, cfg.array_cols) * ceil_div(n_span, cfg.effective_rows());
}

PartitionPlan plan_on_slices(NodeId node, MatrixId a, MatrixId b, std::size_t m, std::size_t n, std::size_t k,
                             const std::vector<SliceId>& group, const SliceConfig& cfg) {
  if (m == 0 || n == 0 || k == 0) throw PlanError("matmul with a zero dimension");
  if (group.empty()) throw PlanError("matmul mapped to an empty slice group");
  PartitionPlan plan;
  plan.node = node;
  plan.m = m;
  plan.n = n;
  plan.k = k;
  plan.slices = group;
  plan.block_width = cfg.array_cols;

  const std::size_t s = group.size();
  const std::size_t base = k / s, rem = k % s;
  std::size_t at = 0;
  const std::size_t n_tiles = ceil_div(n, cfg.effective_rows());
  for (std::size_t i = 0; i < s; ++i) {
    std::size_t len = base + (i < rem ? 1 : 0);
    if (len == 0) continue;
    IndexRange slab{at, at + len};
    at += len;
    plan.k_slabs.push_back(slab);
    plan.a_parts.push_back({a, {0, m}, slab, group[i], n_tiles});
    plan.b_parts.push_back({b, slab, {0, n}, group[i], preload_iterations(len, n, cfg)});
  }
  plan.fan_in = plan.k_slabs.size();

  const std::size_t blocks = ceil_div(n, plan.block_width);
  plan.block_owner.resize(blocks);
  for (std::size_t blk = 0; blk < blocks; ++blk) plan.block_owner[blk] = group[s - 1 - (blk % s)];
  return plan;
}

PartitionPlan plan_matmul(const MatrixDescriptor& a, const MatrixDescriptor& b, const MatrixDescriptor& out,
                          std::size_t slices, const SliceConfig& cfg) {
  if (a.rows == 0 || a.cols == 0 || b.rows == 0 || b.cols == 0) throw PlanError("zero-dimension matrix");
  if (a.cols != b.rows) throw PlanError("common dimensions differ: " + std::to_string(a.cols) + " vs " +
                                        std::to_string(b.rows));
  if (out.rows != a.rows || out.cols != b.cols) throw PlanError("output shape does not match the product");
  if (slices == 0) throw PlanError("at least one slice is required");
  std::vector<SliceId> group(slices);
  for (std::size_t i = 0; i < slices; ++i) group[i] = static_cast<SliceId>(i);
  return plan_on_slices(0, a.id, b.id, a.rows, b.cols, a.cols, group, cfg);
}

// ---------------------------------------------------------------------------

PmiTable::PmiTable(std::size_t slices, unsigned element_bytes)
    : per_slice_(slices), next_free_(slices, 0), element_bytes_(element_bytes) {}

const PmiEntry& PmiTable::add(SliceId slice, MatrixId matrix, Orientation orientation, IndexRange rows,
                              IndexRange cols, bool reserved) {
  if (slice >= per_slice_.size()) throw PlanError("PMI entry for slice out of range");
  if (rows.size() == 0 || cols.size() == 0) throw PlanError("empty PMI entry");
  PmiEntry e;
  e.matrix = matrix;
  e.orientation = orientation;
  e.rows = rows;
  e.cols = cols;
  e.stride = static_cast<std::uint64_t>(cols.size()) * element_bytes_;
  e.base = next_free_[slice];
  e.reserved = reserved;
  next_free_[slice] += e.bytes();
  per_slice_[slice].push_back(e);

  auto& bands = index_[{matrix, orientation}];
  auto band = std::lower_bound(bands.begin(), bands.end(), rows.begin,
                               [](const Band& x, std::size_t r) { return x.rows.begin < r; });
  if (band == bands.end() || band->rows.begin != rows.begin) {
    if (band != bands.end() && band->rows.begin < rows.end) throw PlanError("PMI entries overlap across row bands");
    if (band != bands.begin() && std::prev(band)->rows.end > rows.begin)
      throw PlanError("PMI entries overlap across row bands");
    band = bands.insert(band, Band{rows, {}});
  } else if (band->rows != rows) {
    throw PlanError("PMI entries in one row band must share the row range");
  }
  Ref ref{cols.begin, slice, per_slice_[slice].size() - 1};
  auto pos = std::lower_bound(band->refs.begin(), band->refs.end(), ref,
                              [](const Ref& x, const Ref& y) { return x.col_begin < y.col_begin; });
  if (pos != band->refs.end() && pos->col_begin < cols.end) throw PlanError("overlapping PMI entries");
  if (pos != band->refs.begin()) {
    const auto& prev = per_slice_[std::prev(pos)->slice][std::prev(pos)->index];
    if (prev.cols.end > cols.begin) throw PlanError("overlapping PMI entries");
  }
  band->refs.insert(pos, ref);
  return per_slice_[slice].back();
}

std::size_t PmiTable::total_entries() const {
  std::size_t n = 0;
  for (const auto& v : per_slice_) n += v.size();
  return n;
}

std::size_t PmiTable::orientation_count(MatrixId matrix) const {
  return has(matrix, Orientation::forward) + has(matrix, Orientation::transposed);
}

bool PmiTable::has(MatrixId matrix, Orientation orientation) const {
  return index_.count({matrix, orientation}) != 0;
}

std::vector<PmiTable::Placed> PmiTable::placements(MatrixId matrix, Orientation orientation) const {
  std::vector<Placed> out;
  auto it = index_.find({matrix, orientation});
  if (it == index_.end()) return out;
  for (const auto& band : it->second)
    for (const auto& r : band.refs) out.push_back({r.slice, &per_slice_[r.slice][r.index]});
  return out;
}

PhysicalLocation PmiTable::lookup(MatrixId matrix, std::size_t row, std::size_t col,
                                  Orientation orientation) const {
  auto unmapped = [&] {
    return PlanError("unmapped index (" + std::to_string(row) + "," + std::to_string(col) + ") of matrix " +
                     std::to_string(matrix));
  };
  auto it = index_.find({matrix, orientation});
  if (it == index_.end()) throw unmapped();
  const auto& bands = it->second;
  auto band = std::upper_bound(bands.begin(), bands.end(), row,
                               [](std::size_t r, const Band& b) { return r < b.rows.begin; });
  if (band == bands.begin()) throw unmapped();
  --band;
  if (!band->rows.contains(row)) throw unmapped();
  auto ref = std::upper_bound(band->refs.begin(), band->refs.end(), col,
                              [](std::size_t c, const Ref& r) { return c < r.col_begin; });
  if (ref == band->refs.begin()) throw unmapped();
  --ref;
  const auto& e = per_slice_[ref->slice][ref->index];
  if (!e.cols.contains(col)) throw unmapped();
  return {ref->slice, e.base + (row - e.rows.begin) * e.stride + (col - e.cols.begin) * element_bytes_};
}

PhysicalLocation pmi_lookup(const PmiTable& table, MatrixId matrix, std::size_t row, std::size_t col,
                            Orientation orientation) {
  return table.lookup(matrix, row, col, orientation);
}

// ---------------------------------------------------------------------------

std::vector<std::vector<SliceId>> layout_groups(std::size_t groups, std::size_t slices) {
  if (slices == 0) throw PlanError("at least one slice is required");
  std::vector<SliceId> all(slices);
  for (std::size_t i = 0; i < slices; ++i) all[i] = static_cast<SliceId>(i);
  std::vector<std::vector<SliceId>> out{all};
  if (groups == 0) return out;
  if (slices < groups) {
    for (std::size_t g = 0; g < groups; ++g) out.push_back(all);
    return out;
  }
  const std::size_t base = slices / groups, rem = slices % groups;
  SliceId at = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    std::size_t len = base + (g < rem ? 1 : 0);
    std::vector<SliceId> grp;
    for (std::size_t i = 0; i < len; ++i) grp.push_back(at++);
    out.push_back(std::move(grp));
  }
  return out;
}

namespace {

class Placer {
 public:
  Placer(const OpGraph& g, GraphPlan& p) : graph_(g), plan_(p) {}

  bool placed(MatrixId id) const { return plan_.pmi.has(id, Orientation::forward); }

  void whole(MatrixId id, SliceId slice, bool reserved) {
    if (placed(id)) return;
    const auto& d = graph_.matrix(id);
    plan_.pmi.add(slice, id, Orientation::forward, {0, d.rows}, {0, d.cols}, reserved);
  }

  /// Places the stored parts of an operand as k-slabs at the slices of
  /// `parts`. The k axis is the operand's row axis for B and its column axis
  /// for A. Only a weight used flipped as B gets a second, transposed set.
  void k_slabs(const Operand& op, const PartitionPlan& pp, const std::vector<Partition>& parts, bool is_b) {
    // k runs along the concatenation's shared row axis, or across the parts.
    const bool k_on_rows = is_b != op.transposed;
    std::size_t offset = 0;  // position of the part along the concatenation
    for (auto part : op.parts) {
      const auto& d = graph_.matrix(part);
      const MatrixId stored = d.view_of ? *d.view_of : part;
      const bool view = static_cast<bool>(d.view_of);
      const auto& sd = graph_.matrix(stored);
      Orientation orient = Orientation::forward;
      if (placed(stored)) {
        const bool flipped = op.transposed != view;
        if (!is_b || sd.role != MatrixRole::weight || !plan_.dual_mapping || !flipped ||
            plan_.pmi.has(stored, Orientation::transposed)) {
          offset += d.cols;
          continue;
        }
        orient = Orientation::transposed;
      }
      for (std::size_t i = 0; i < pp.k_slabs.size(); ++i) {
        IndexRange rows{0, d.rows}, cols{0, d.cols};
        if (k_on_rows) {
          rows = pp.k_slabs[i];
        } else {
          std::size_t lo = std::max(pp.k_slabs[i].begin, offset), hi = std::min(pp.k_slabs[i].end, offset + d.cols);
          if (lo >= hi) continue;
          cols = {lo - offset, hi - offset};
        }
        if (view) std::swap(rows, cols);
        plan_.pmi.add(parts[i].slice, stored, orient, rows, cols, false);
      }
      offset += d.cols;
    }
  }

  void matmul_output(const OpNode& node, const PartitionPlan& pp) {
    for (auto o : node.out) {
      if (placed(o)) return;
    }
    std::size_t offset = 0;
    for (auto o : node.out) {
      const auto& d = graph_.matrix(o);
      for (std::size_t blk = 0; blk < pp.block_owner.size(); ++blk) {
        std::size_t lo = std::max(blk * pp.block_width, offset);
        std::size_t hi = std::min((blk + 1) * pp.block_width, offset + d.cols);
        if (lo >= hi) continue;
        plan_.pmi.add(pp.block_owner[blk], o, Orientation::forward, {0, d.rows}, {lo - offset, hi - offset}, true);
      }
      offset += d.cols;
    }
  }

 private:
  const OpGraph& graph_;
  GraphPlan& plan_;
};

}  // namespace

GraphPlan plan_graph(const OpGraph& graph, std::size_t slices, const SliceConfig& cfg, const PlanOptions& options) {
  graph.check();
  GraphPlan plan;
  plan.num_slices = slices;
  plan.dual_mapping = options.dual_mapping;
  plan.pmi = PmiTable(slices, static_cast<unsigned>(cfg.element_bytes()));
  plan.order = graph.topological_order();
  plan.program.resize(slices);

  std::size_t max_group = 0;
  for (const auto& n : graph.nodes()) max_group = std::max(max_group, n.mapping_group);
  plan.groups = layout_groups(max_group, slices);

  for (auto id : plan.order) {
    const auto& n = graph.node(id);
    const auto& group = plan.groups.at(n.mapping_group);
    if (n.is_matmul()) {
      auto pp = plan_on_slices(id, n.a.parts.front(), n.b.parts.front(), graph.operand_rows(n.a),
                               graph.operand_cols(n.b), graph.operand_cols(n.a), group, cfg);
      for (const auto& part : pp.b_parts) plan.program[part.slice].push_back(id);
      plan.matmuls.emplace(id, std::move(pp));
    } else {
      plan.home[id] = group.back();
      plan.program[group.back()].push_back(id);
    }
  }

  Placer placer(graph, plan);
  for (auto id : plan.order) {
    const auto& n = graph.node(id);
    if (n.is_matmul()) {
      const auto& pp = plan.matmuls.at(id);
      placer.k_slabs(n.b, pp, pp.b_parts, true);
      placer.k_slabs(n.a, pp, pp.a_parts, false);
      placer.matmul_output(n, pp);
    } else {
      SliceId home = plan.home.at(id);
      for (auto in : n.inputs)
        if (in != kNoMatrix) placer.whole(graph.matrix(in).view_of.value_or(in), home, false);
      for (auto o : n.out) placer.whole(o, home, true);
    }
  }

  if (options.slice_capacity_bytes > 0) {
    for (SliceId s = 0; s < slices; ++s)
      if (plan.pmi.used_bytes(s) > options.slice_capacity_bytes)
        throw PlanError("slice memory capacity exceeded on slice " + std::to_string(s) + ": " +
                        std::to_string(plan.pmi.used_bytes(s)) + " > " +
                        std::to_string(options.slice_capacity_bytes) + " bytes");
  }
  return plan;
}

std::string dump_plan(const PartitionPlan& plan, const std::string& a_name, const std::string& b_name) {
  std::ostringstream os;
  os << "matmul " << plan.node << " m=" << plan.m << " n=" << plan.n << " k=" << plan.k
     << " fan_in=" << plan.fan_in << "\n";
  for (const auto& p : plan.a_parts)
    os << "  A " << a_name << " rows " << range_str(p.rows) << " cols " << range_str(p.cols) << " slice " << p.slice
       << " iters " << p.load_iterations << "\n";
  for (const auto& p : plan.b_parts)
    os << "  B " << b_name << " rows " << range_str(p.rows) << " cols " << range_str(p.cols) << " slice " << p.slice
       << " iters " << p.load_iterations << "\n";
  for (std::size_t blk = 0; blk < plan.block_owner.size(); ++blk) {
    IndexRange cols{blk * plan.block_width, std::min((blk + 1) * plan.block_width, plan.n)};
    os << "  C cols " << range_str(cols) << " slice " << plan.block_owner[blk] << "\n";
  }
  return os.str();
}

std::string dump_plan(const OpGraph& graph, const GraphPlan& plan) {
  std::ostringstream os;
  os << "slices " << plan.num_slices << " nodes " << graph.nodes().size() << "\n";
  for (auto id : plan.order) {
    const auto& n = graph.node(id);
    if (n.is_matmul()) {
      os << "# " << n.label << "\n";
      os << dump_plan(plan.matmuls.at(id), graph.matrix(n.a.parts.front()).name,
                      graph.matrix(n.b.parts.front()).name);
    } else {
      os << "elementwise " << id << " " << n.label << " home " << plan.home.at(id) << "\n";
    }
  }
  for (SliceId s = 0; s < plan.num_slices; ++s)
    for (const auto& e : plan.pmi.entries(s))
      os << "pmi slice " << s << " " << graph.matrix(e.matrix).name
         << (e.orientation == Orientation::transposed ? " T" : " F") << " rows " << range_str(e.rows) << " cols "
         << range_str(e.cols) << " base " << e.base << " stride " << e.stride << (e.reserved ? " reserved" : "")
         << "\n";
  return os.str();
}

}  // namespace mslice
