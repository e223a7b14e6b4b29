#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "mslice/oracle.hpp"
#include "mslice/workloads.hpp"

using namespace mslice;

namespace {

// Direct convolution, independent of the lowering.
Matrix direct_conv(const ConvSpec& s, const MatrixF& in, const MatrixF& ker) {
  const std::size_t oh = s.out_h(), ow = s.out_w();
  Matrix out(s.batch * oh * ow, s.kernels);
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t k = 0; k < s.kernels; ++k)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0;
          for (std::size_t c = 0; c < s.channels; ++c)
            for (std::size_t ky = 0; ky < s.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
                long y = long(oy * s.stride + ky) - long(s.padding);
                long x = long(ox * s.stride + kx) - long(s.padding);
                if (y < 0 || x < 0 || y >= long(s.height) || x >= long(s.width)) continue;
                acc += double(in(n, (c * s.height + y) * s.width + x)) *
                       double(ker(k, (c * s.kernel_h + ky) * s.kernel_w + kx));
              }
          out((n * oh + oy) * ow + ox, k) = acc;
        }
  return out;
}

std::size_t count_matmuls(const OpGraph& g) {
  return std::count_if(g.nodes().begin(), g.nodes().end(), [](const OpNode& n) { return n.is_matmul(); });
}

}  // namespace

TEST_CASE("im2col lowering equals direct convolution") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<float> d(-1, 1);
  for (int trial = 0; trial < 30; ++trial) {
    ConvSpec s;
    s.batch = 1 + rng() % 2;
    s.channels = 1 + rng() % 3;
    s.height = 3 + rng() % 5;
    s.width = 3 + rng() % 5;
    s.kernels = 1 + rng() % 4;
    s.kernel_h = 1 + rng() % 3;
    s.kernel_w = 1 + rng() % 3;
    s.stride = 1 + rng() % 2;
    s.padding = rng() % 2;
    MatrixF in(s.batch, s.channels * s.height * s.width), ker(s.kernels, s.channels * s.kernel_h * s.kernel_w);
    for (auto& v : in.data()) v = d(rng);
    for (auto& v : ker.data()) v = d(rng);
    auto a = Matrix::from(im2col_values(s, in));
    auto b = Matrix::from(conv_kernel_matrix(s, ker));
    CHECK(relative_error(oracle::matmul(a, b), direct_conv(s, in, ker)) < 1e-12);
  }
}

TEST_CASE("im2col duplication") {
  ConvSpec one;
  one.kernel_h = one.kernel_w = 1;
  auto l1 = im2col(one);
  CHECK(l1.a.rows == 25);
  CHECK(l1.a.cols == 1);
  for (auto c : l1.copies) CHECK(c == 1);
  CHECK(l1.duplicated_elements() == 25);

  ConvSpec three;  // 3x3 over 5x5, stride 1
  auto l3 = im2col(three);
  CHECK(l3.a.rows == 9);
  CHECK(l3.a.cols == 9);
  CHECK(*std::max_element(l3.copies.begin(), l3.copies.end()) == 9);
  CHECK(l3.copies[2 * 5 + 2] == 9);  // centre
  CHECK(l3.copies[0] == 1);          // corner
  CHECK(l3.copies[2] == 3);          // top edge middle
  CHECK(l3.duplicated_elements() == 81);

  ConvSpec big;
  big.kernel_h = 7;
  CHECK_THROWS_AS(im2col(big), GraphError);

  auto w = build_conv(three);
  CHECK(w.lowering_bytes == 81 * 2);
  CHECK(count_matmuls(w.graph) == 1);
}

TEST_CASE("intensity") {
  OpGraph g;
  auto a = g.add_matrix("A", 256, 256, MatrixRole::input);
  auto b = g.add_matrix("B", 256, 256, MatrixRole::weight);
  auto c = g.add_matrix("C", 256, 256, MatrixRole::output);
  CHECK_THROWS_AS(intensity(g), GraphError);
  OpNode n;
  n.a.parts = {a};
  n.b.parts = {b};
  n.out = {c};
  g.add_node(n);
  CHECK(g.total_flops() == 2.0 * 256 * 256 * 256);
  CHECK(unique_bytes(g) == 3u * 256 * 256 * 2);
  CHECK(intensity(g) == doctest::Approx(85.333).epsilon(1e-4));
}

TEST_CASE("translator shapes") {
  TranslatorSpec s;
  s.hidden = 3;
  s.batch = 3;
  s.layers = 5;
  auto w = build_translator_forward(s);
  std::size_t lstm = 0;
  for (const auto& n : w.graph.nodes()) {
    if (n.post != PostOp::lstm_gates) continue;
    ++lstm;
    CHECK(w.graph.operand_rows(n.a) == 3);
    CHECK(w.graph.operand_cols(n.a) == 6);
    CHECK(w.graph.operand_rows(n.b) == 6);
    CHECK(w.graph.operand_cols(n.b) == 12);
  }
  // encoders run over src positions, decoders over dst positions
  CHECK(lstm == s.encoders() * s.src_len + s.decoders() * s.dst_len);
  CHECK(s.encoders() == 2);
  CHECK(s.decoders() == 2);
  CHECK(w.layout.weights.size() == 4);
  CHECK(w.layout.attention_weight != kNoMatrix);
}

TEST_CASE("micro-steps per time-step") {
  for (auto [src, dst, expect] : {std::tuple{4u, 6u, 10u}, {2u, 2u, 4u}}) {
    TranslatorSpec s;
    s.src_len = src;
    s.dst_len = dst;
    s.layers = 5;
    auto w = build_translator_forward(s);
    std::set<std::size_t> micro;
    for (const auto& n : w.graph.nodes()) micro.insert(n.micro_step);
    CHECK(micro.size() == expect);
    CHECK(*micro.rbegin() == expect - 1);
  }
}

TEST_CASE("attention depends on the last encoder output") {
  TranslatorSpec s;
  s.layers = 3;
  auto w = build_translator_forward(s);
  for (const auto& n : w.graph.nodes()) {
    if (n.post != PostOp::tanh) continue;
    CHECK(n.a.parts.front() == w.layout.h[0][s.encoders() - 1][s.src_len - 1]);
    CHECK(n.micro_step >= s.src_len);
  }
}

TEST_CASE("truncated BPTT error chain") {
  auto cross_step_backward_edges = [](const Workload& w) {
    std::size_t n = 0;
    for (const auto& node : w.graph.nodes()) {
      if (!node.backward) continue;
      for (auto d : node.deps) {
        const auto& dep = w.graph.node(d);
        if (dep.backward && dep.time_step != node.time_step) ++n;
      }
    }
    return n;
  };
  TranslatorSpec s;
  s.layers = 3;
  s.time_steps = 4;
  auto w = build_translator_training(s);
  std::set<std::size_t> steps;
  NodeId last_backward = 0;
  for (const auto& n : w.graph.nodes())
    if (n.backward && n.kind != NodeKind::weight_update) {
      steps.insert(n.time_step);
      last_backward = n.id;
    }
  CHECK(steps == std::set<std::size_t>{0, 1, 2, 3});
  CHECK(w.graph.node(last_backward).time_step == 0);
  CHECK(cross_step_backward_edges(w) > 0);

  s.time_steps = 1;
  CHECK(cross_step_backward_edges(build_translator_training(s)) == 0);
}

TEST_CASE("training adds weight gradients and updates") {
  TranslatorSpec s;
  s.layers = 3;
  auto w = build_translator_training(s);
  CHECK_NOTHROW(w.graph.check());
  CHECK_NOTHROW(w.graph.topological_order());
  std::size_t updates = 0;
  for (const auto& n : w.graph.nodes())
    if (n.kind == NodeKind::weight_update) ++updates;
  std::size_t parts = 0;
  for (const auto& [wid, grads] : w.layout.weight_grads) parts += grads.size();
  CHECK(updates == parts);
  CHECK(w.layout.weight_grads.size() == w.layout.weights.size() + 1);  // plus attention
}

TEST_CASE("single-layer translator") {
  TranslatorSpec s;
  s.layers = 1;
  s.src_len = 3;
  s.dst_len = 2;
  auto w = build_translator_forward(s);
  CHECK(s.encoders() == 1);
  CHECK(s.decoders() == 0);
  CHECK(count_matmuls(w.graph) == 5);
  CHECK(w.layout.attention_weight == kNoMatrix);
}

TEST_CASE("initial values cover every unproduced matrix") {
  TranslatorSpec s;
  auto w = build_translator_training(s);
  std::set<MatrixId> produced;
  for (const auto& n : w.graph.nodes())
    if (n.kind != NodeKind::weight_update)
      for (auto o : n.out) produced.insert(o);
  for (const auto& d : w.graph.matrices()) {
    if (d.view_of || produced.contains(d.id)) continue;
    CAPTURE(d.name);
    CHECK(w.initial.contains(d.id));
  }
}
