#include "mslice/graph.hpp"

#include <queue>

namespace mslice {

MatrixId OpGraph::add_matrix(std::string name, std::size_t rows, std::size_t cols, MatrixRole role,
                             unsigned element_width) {
  if (rows == 0 || cols == 0) throw GraphError("matrix '" + name + "' has a zero dimension");
  MatrixDescriptor d;
  d.id = static_cast<MatrixId>(matrices_.size());
  d.name = std::move(name);
  d.rows = rows;
  d.cols = cols;
  d.role = role;
  d.element_width = element_width;
  matrices_.push_back(std::move(d));
  return matrices_.back().id;
}

MatrixId OpGraph::add_transpose_view(MatrixId of, std::string name) {
  const auto& base = matrix(of);
  if (base.view_of) throw GraphError("transpose of a view is not supported");
  MatrixDescriptor d;
  d.id = static_cast<MatrixId>(matrices_.size());
  d.name = std::move(name);
  d.rows = base.cols;
  d.cols = base.rows;
  d.role = MatrixRole::transpose_view;
  d.element_width = base.element_width;
  d.view_of = of;
  matrices_.push_back(std::move(d));
  return matrices_.back().id;
}

NodeId OpGraph::add_node(OpNode node) {
  node.id = static_cast<NodeId>(nodes_.size());
  for (auto d : node.deps)
    if (d >= node.id) throw GraphError("dependency on a node that does not exist yet");
  nodes_.push_back(std::move(node));
  return nodes_.back().id;
}

void OpGraph::add_edge(NodeId from, NodeId to) {
  if (from >= nodes_.size() || to >= nodes_.size()) throw GraphError("edge endpoint out of range");
  auto& deps = nodes_[to].deps;
  for (auto d : deps)
    if (d == from) return;
  deps.push_back(from);
}

std::size_t OpGraph::operand_rows(const Operand& op) const {
  if (op.parts.empty()) throw GraphError("empty operand");
  return op.transposed ? operand_cols(Operand{op.parts, false}) : matrix(op.parts.front()).rows;
}

std::size_t OpGraph::operand_cols(const Operand& op) const {
  if (op.parts.empty()) throw GraphError("empty operand");
  if (op.transposed) return matrix(op.parts.front()).rows;
  std::size_t cols = 0;
  for (auto p : op.parts) cols += matrix(p).cols;
  return cols;
}

OpGraph::Element OpGraph::resolve(const Operand& op, std::size_t row, std::size_t col) const {
  if (op.transposed) std::swap(row, col);
  for (auto p : op.parts) {
    const auto& d = matrix(p);
    if (col < d.cols) {
      if (d.view_of) return {*d.view_of, col, row};
      return {p, row, col};
    }
    col -= d.cols;
  }
  throw GraphError("operand index out of range");
}

OpGraph::Element OpGraph::resolve_output(const OpNode& node, std::size_t row, std::size_t col) const {
  return resolve(Operand{node.out, false}, row, col);
}

std::size_t OpGraph::output_cols(const OpNode& node) const { return operand_cols(Operand{node.out, false}); }

std::vector<NodeId> OpGraph::topological_order() const {
  std::vector<std::size_t> indegree(nodes_.size(), 0);
  std::vector<std::vector<NodeId>> succ(nodes_.size());
  for (const auto& n : nodes_)
    for (auto d : n.deps) {
      if (d >= nodes_.size()) throw GraphError("dependency out of range");
      ++indegree[n.id];
      succ[d].push_back(n.id);
    }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& n : nodes_)
    if (indegree[n.id] == 0) ready.push(n.id);
  std::vector<NodeId> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    auto id = ready.top();
    ready.pop();
    order.push_back(id);
    for (auto s : succ[id])
      if (--indegree[s] == 0) ready.push(s);
  }
  if (order.size() != nodes_.size()) throw GraphError("operation graph contains a cycle");
  return order;
}

std::vector<NodeId> OpGraph::consumers(NodeId id) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    for (auto d : n.deps)
      if (d == id) {
        out.push_back(n.id);
        break;
      }
  return out;
}

double OpGraph::node_flops(const OpNode& n) const {
  if (n.is_matmul()) {
    double m = static_cast<double>(operand_rows(n.a));
    double k = static_cast<double>(operand_cols(n.a));
    double cols = static_cast<double>(operand_cols(n.b));
    double f = 2.0 * m * cols * k;
    if (n.post != PostOp::none) f += flop_cost::post_op * m * cols;
    return f;
  }
  auto size = [&](MatrixId id) {
    const auto& d = matrix(id);
    return static_cast<double>(d.rows * d.cols);
  };
  switch (n.op) {
    case ElementwiseOp::lstm_cell: return flop_cost::lstm_cell * size(n.inputs.at(1));
    case ElementwiseOp::lstm_cell_backward: {
      double unit = size(n.inputs.at(1));
      double extra = n.inputs.size() > 5 ? static_cast<double>(n.inputs.size() - 5) : 0.0;
      return flop_cost::lstm_cell_backward * unit + extra * unit;
    }
    case ElementwiseOp::tanh_backward: {
      double s = size(n.inputs.at(0));
      return flop_cost::tanh_backward * s + static_cast<double>(n.inputs.size() - 2) * s;
    }
    case ElementwiseOp::loss_grad: return flop_cost::loss_grad * size(n.inputs.at(0));
    case ElementwiseOp::sgd: return flop_cost::sgd * size(n.inputs.at(0));
    case ElementwiseOp::none: return 0.0;
  }
  return 0.0;
}

double OpGraph::total_flops() const {
  double f = 0.0;
  for (const auto& n : nodes_) f += node_flops(n);
  return f;
}

void OpGraph::check() const {
  auto exists = [&](MatrixId id) {
    if (id >= matrices_.size()) throw GraphError("unknown matrix id " + std::to_string(id));
  };
  for (const auto& n : nodes_) {
    for (auto p : n.a.parts) exists(p);
    for (auto p : n.b.parts) exists(p);
    for (auto p : n.out) exists(p);
    for (auto p : n.inputs)
      if (p != kNoMatrix) exists(p);
    if (n.is_matmul()) {
      if (operand_cols(n.a) != operand_rows(n.b))
        throw GraphError("node '" + n.label + "': inner dimensions differ");
      if (n.out.empty()) throw GraphError("node '" + n.label + "': no output");
      for (auto o : n.out)
        if (matrix(o).rows != operand_rows(n.a)) throw GraphError("node '" + n.label + "': output rows differ");
      if (output_cols(n) != operand_cols(n.b)) throw GraphError("node '" + n.label + "': output cols differ");
    } else if (n.out.empty()) {
      throw GraphError("node '" + n.label + "': no output");
    }
  }
}

}  // namespace mslice
