#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mslice/config.hpp"
#include "mslice/graph.hpp"

namespace mslice {

using SliceId = std::uint32_t;

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
  bool operator==(const IndexRange&) const = default;
};

struct Partition {
  MatrixId matrix = kNoMatrix;
  IndexRange rows, cols;
  SliceId slice = 0;
  /// Register loads (for the preloaded operand) or stream passes (for the
  /// streamed operand) this partition needs per execution.
  std::size_t load_iterations = 0;
};

/// Common-dimension split of one C = A * B.
struct PartitionPlan {
  NodeId node = 0;
  std::size_t m = 0, n = 0, k = 0;
  std::vector<SliceId> slices;          // slice group the matmul is mapped to
  std::vector<IndexRange> k_slabs;      // non-empty slabs, ascending
  std::vector<Partition> a_parts;       // column slabs of A, aligned with k_slabs
  std::vector<Partition> b_parts;       // row slabs of B, aligned with k_slabs
  std::size_t block_width = 8;          // output column block width
  std::vector<SliceId> block_owner;     // output column block -> slice
  std::size_t fan_in = 0;

  SliceId owner_of_column(std::size_t col) const { return block_owner.at(col / block_width); }
  std::size_t total_load_iterations() const;
};

/// Register-B tiles needed for a k-span x n-span slab: the array holds
/// array_cols values of the common dimension per row and one output column
/// per row, so iterations = ceil(k / cols) * ceil(n / effective rows).
std::size_t preload_iterations(std::size_t k_span, std::size_t n_span, const SliceConfig& cfg);

/// Splits k across `slices` contiguous slabs (sizes differ by at most one,
/// larger slabs on lower slice ids); slab s goes to slice s.
PartitionPlan plan_matmul(const MatrixDescriptor& a, const MatrixDescriptor& b, const MatrixDescriptor& out,
                          std::size_t slices, const SliceConfig& cfg);
/// Same split over an explicit slice group.
PartitionPlan plan_on_slices(NodeId node, MatrixId a, MatrixId b, std::size_t m, std::size_t n, std::size_t k,
                             const std::vector<SliceId>& group, const SliceConfig& cfg);

enum class Orientation : std::uint8_t { forward = 0, transposed = 1 };

struct PmiEntry {
  MatrixId matrix = kNoMatrix;
  Orientation orientation = Orientation::forward;
  IndexRange rows, cols;  // in the stored matrix's own coordinates
  std::uint64_t base = 0;
  std::uint64_t stride = 0;  // bytes per entry row
  bool reserved = false;     // produced during execution
  std::uint64_t bytes() const noexcept { return stride * rows.size(); }
};

struct PhysicalLocation {
  SliceId slice = 0;
  std::uint64_t address = 0;
  bool operator==(const PhysicalLocation&) const = default;
};

class PmiTable {
 public:
  explicit PmiTable(std::size_t slices = 0, unsigned element_bytes = 2);

  /// Appends an entry at the slice's next free address.
  const PmiEntry& add(SliceId slice, MatrixId matrix, Orientation orientation, IndexRange rows, IndexRange cols,
                      bool reserved);

  std::size_t num_slices() const noexcept { return per_slice_.size(); }
  const std::vector<PmiEntry>& entries(SliceId slice) const { return per_slice_.at(slice); }
  std::size_t total_entries() const;
  std::uint64_t used_bytes(SliceId slice) const { return next_free_.at(slice); }
  unsigned element_bytes() const noexcept { return element_bytes_; }
  /// Number of distinct orientations that have entries for `matrix`.
  std::size_t orientation_count(MatrixId matrix) const;
  bool has(MatrixId matrix, Orientation orientation) const;

  /// O(log entries). Throws PlanError when the index is unmapped.
  PhysicalLocation lookup(MatrixId matrix, std::size_t row, std::size_t col,
                          Orientation orientation = Orientation::forward) const;

  struct Placed {
    SliceId slice;
    const PmiEntry* entry;
  };
  /// All entries of one orientation of a matrix, ordered by (row, col).
  std::vector<Placed> placements(MatrixId matrix, Orientation orientation) const;

 private:
  struct Ref {
    std::size_t col_begin;
    SliceId slice;
    std::size_t index;
  };
  // Entries of one (matrix, orientation) grouped into row bands; within a
  // band entries share the row range and are sorted by column.
  struct Band {
    IndexRange rows;
    std::vector<Ref> refs;
  };
  std::vector<std::vector<PmiEntry>> per_slice_;
  std::vector<std::uint64_t> next_free_;
  std::map<std::pair<MatrixId, Orientation>, std::vector<Band>> index_;
  unsigned element_bytes_;
};

PhysicalLocation pmi_lookup(const PmiTable& table, MatrixId matrix, std::size_t row, std::size_t col,
                            Orientation orientation = Orientation::forward);

/// Full mapping of a graph onto the slices.
struct GraphPlan {
  std::size_t num_slices = 0;
  std::map<NodeId, PartitionPlan> matmuls;
  std::map<NodeId, SliceId> home;                 // elementwise nodes
  std::vector<std::vector<SliceId>> groups;       // index = mapping group
  std::vector<NodeId> order;                      // program order
  std::vector<std::vector<NodeId>> program;       // per-slice task sequence
  PmiTable pmi;
  bool dual_mapping = true;
};

struct PlanOptions {
  bool dual_mapping = true;
  std::uint64_t slice_capacity_bytes = 0;  // 0 = unlimited
};

GraphPlan plan_graph(const OpGraph& graph, std::size_t slices, const SliceConfig& cfg, const PlanOptions& options);

/// Slices assigned to each mapping group for `slices` slices.
std::vector<std::vector<SliceId>> layout_groups(std::size_t groups, std::size_t slices);

/// One partition per line: matrix, ranges, slice, iterations.
std::string dump_plan(const OpGraph& graph, const GraphPlan& plan);
std::string dump_plan(const PartitionPlan& plan, const std::string& a_name, const std::string& b_name);

}  // namespace mslice
