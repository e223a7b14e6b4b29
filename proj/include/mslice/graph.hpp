#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mslice {

using MatrixId = std::uint32_t;
using NodeId = std::uint32_t;
inline constexpr MatrixId kNoMatrix = std::numeric_limits<MatrixId>::max();

enum class MatrixRole { weight, input, output, state, error, transpose_view };

struct MatrixDescriptor {
  MatrixId id = 0;
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  MatrixRole role = MatrixRole::input;
  unsigned element_width = 16;
  /// Set for transpose views: the descriptor whose storage this views.
  std::optional<MatrixId> view_of;
};

/// Logical matmul operand: the listed matrices concatenated column-wise
/// (all with equal row counts), optionally transposed.
struct Operand {
  std::vector<MatrixId> parts;
  bool transposed = false;
};

enum class NodeKind { matmul, aggregate_activate, weight_update, error_matmul };

/// Applied by the aggregation engine when an output element finalizes.
enum class PostOp { none, sigmoid, tanh, lstm_gates };

/// Elementwise work done by the aggregation engine of the node's home slice.
enum class ElementwiseOp {
  none,
  lstm_cell,           // in: gates(act), c_prev          out: h, c
  lstm_cell_backward,  // in: gates, c_prev, c, dc_next, dh...   out: dz, dc_prev
  tanh_backward,       // in: a, da...                    out: dpre
  loss_grad,           // in: h, target                   out: dh = h - target
  sgd,                 // in: w, grad                     out: w (in place)
};

struct OpNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::matmul;
  std::string label;
  // matmul / error_matmul
  Operand a, b;
  PostOp post = PostOp::none;
  // aggregate_activate / weight_update
  ElementwiseOp op = ElementwiseOp::none;
  std::vector<MatrixId> inputs;
  double eta = 0.0;
  /// Outputs, concatenated column-wise for matmuls.
  std::vector<MatrixId> out;
  std::size_t time_step = 0;
  std::size_t micro_step = 0;
  std::size_t layer = 0;
  /// Forward or backward phase; backward operands use the transposed mapping.
  bool backward = false;
  std::vector<NodeId> deps;
  /// Mapping hint: nodes sharing a group share slices; group 0 spans all
  /// slices, groups 1..G are laid out sequentially across the slices.
  std::size_t mapping_group = 0;

  bool is_matmul() const noexcept { return kind == NodeKind::matmul || kind == NodeKind::error_matmul; }
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dependency DAG of matrix work labeled with time-steps and micro-steps.
class OpGraph {
 public:
  MatrixId add_matrix(std::string name, std::size_t rows, std::size_t cols, MatrixRole role,
                      unsigned element_width = 16);
  MatrixId add_transpose_view(MatrixId of, std::string name);
  NodeId add_node(OpNode node);
  void add_edge(NodeId from, NodeId to);

  const MatrixDescriptor& matrix(MatrixId id) const { return matrices_.at(id); }
  const std::vector<MatrixDescriptor>& matrices() const noexcept { return matrices_; }
  const OpNode& node(NodeId id) const { return nodes_.at(id); }
  OpNode& node(NodeId id) { return nodes_.at(id); }
  const std::vector<OpNode>& nodes() const noexcept { return nodes_; }
  bool empty() const noexcept { return nodes_.empty(); }

  /// Rows/cols of an operand after concatenation and optional transpose.
  std::size_t operand_rows(const Operand& op) const;
  std::size_t operand_cols(const Operand& op) const;
  /// Resolves (row, col) of a logical operand to (matrix, row, col) of the
  /// stored matrix. Transpose views resolve to the matrix they view.
  struct Element {
    MatrixId matrix;
    std::size_t row, col;
  };
  Element resolve(const Operand& op, std::size_t row, std::size_t col) const;
  Element resolve_output(const OpNode& node, std::size_t row, std::size_t col) const;
  std::size_t output_cols(const OpNode& node) const;

  /// Kahn order, lowest id first among ready nodes. Throws GraphError on cycles.
  std::vector<NodeId> topological_order() const;
  /// Nodes that list `id` among their deps.
  std::vector<NodeId> consumers(NodeId id) const;
  /// Analytic FLOPs of one node (2mnk per matmul plus counted extras).
  double node_flops(const OpNode& node) const;
  double total_flops() const;
  /// Structural checks: operands exist, matmul shapes agree.
  void check() const;

 private:
  std::vector<MatrixDescriptor> matrices_;
  std::vector<OpNode> nodes_;
};

/// FLOPs charged per element for elementwise work.
namespace flop_cost {
inline constexpr double post_op = 1.0;
inline constexpr double lstm_cell = 5.0;             // per hidden unit
inline constexpr double lstm_cell_backward = 24.0;   // per hidden unit
inline constexpr double tanh_backward = 3.0;
inline constexpr double loss_grad = 1.0;
inline constexpr double sgd = 2.0;
}  // namespace flop_cost

}  // namespace mslice
