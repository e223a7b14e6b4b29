#include "mslice/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace mslice {

TranslatorSpec translator_spec(const SystemConfig& cfg) {
  TranslatorSpec s;
  s.hidden = cfg.workload.hidden;
  s.layers = cfg.workload.layers;
  s.batch = cfg.batch_size;
  s.src_len = cfg.workload.src_len;
  s.dst_len = cfg.workload.dst_len;
  s.time_steps = cfg.workload.time_steps;
  s.eta = cfg.workload.eta;
  s.seed = cfg.seed;
  return s;
}

namespace {

/// Adds nodes with dependencies derived from matrix reads and writes:
/// read-after-write, write-after-write and write-after-read.
class GraphBuilder {
 public:
  enum class Fill { none, zero, weight, data };

  MatrixId matrix(const std::string& name, std::size_t rows, std::size_t cols, MatrixRole role,
                  Fill fill = Fill::none) {
    auto id = graph.add_matrix(name, rows, cols, role);
    if (fill != Fill::none) fills.emplace_back(id, fill);
    return id;
  }

  NodeId add(OpNode n) {
    std::set<NodeId> deps(n.deps.begin(), n.deps.end());
    std::vector<MatrixId> reads;
    for (auto p : n.a.parts) reads.push_back(base(p));
    for (auto p : n.b.parts) reads.push_back(base(p));
    for (auto p : n.inputs)
      if (p != kNoMatrix) reads.push_back(base(p));
    for (auto r : reads)
      if (auto it = last_writer_.find(r); it != last_writer_.end()) deps.insert(it->second);
    for (auto w : n.out) {
      if (auto it = last_writer_.find(w); it != last_writer_.end()) deps.insert(it->second);
      for (auto r : readers_[w]) deps.insert(r);
    }
    n.deps.assign(deps.begin(), deps.end());
    auto outs = n.out;
    auto id = graph.add_node(std::move(n));
    for (auto r : reads) readers_[r].push_back(id);
    for (auto w : outs) {
      last_writer_[w] = id;
      readers_[w].clear();
    }
    return id;
  }

  MatrixId base(MatrixId id) const { return graph.matrix(id).view_of.value_or(id); }

  /// Produces values for every matrix registered with a fill rule.
  std::map<MatrixId, MatrixF> generate(std::uint64_t seed, std::size_t hidden) const {
    std::mt19937_64 rng(seed);
    const float scale = 1.0f / std::sqrt(static_cast<float>(std::max<std::size_t>(hidden, 1)));
    std::uniform_real_distribution<float> w(-scale, scale), d(-1.0f, 1.0f);
    std::map<MatrixId, MatrixF> out;
    for (const auto& [id, fill] : fills) {
      const auto& desc = graph.matrix(id);
      MatrixF m(desc.rows, desc.cols);
      if (fill != Fill::zero && fill != Fill::none)
        for (auto& v : m.data()) v = fill == Fill::weight ? w(rng) : d(rng);
      out.emplace(id, std::move(m));
    }
    return out;
  }

  OpGraph graph;
  std::vector<std::pair<MatrixId, Fill>> fills;

 private:
  std::map<MatrixId, NodeId> last_writer_;
  std::map<MatrixId, std::vector<NodeId>> readers_;
};

struct Cell {
  std::size_t layer, t, pos, micro, group;
  MatrixId in, h_prev, c_prev, gates, h, c;
};

struct AttentionStep {
  std::size_t t, j, micro;
  MatrixId e_last, e_j, out;
};

// One unrolled forward item, in creation order.
struct ForwardItem {
  bool attention;
  std::size_t index;
};

class TranslatorBuilder {
 public:
  explicit TranslatorBuilder(const TranslatorSpec& s) : spec_(s) {
    if (s.hidden < 1 || s.batch < 1 || s.src_len < 1 || s.dst_len < 1 || s.time_steps < 1)
      throw GraphError("invalid translator spec");
    if (s.layers != 1 && s.layers < 3) throw GraphError("translator needs 1 or at least 3 layers");
  }

  Workload build(bool training) {
    forward();
    if (training) backward();
    Workload w;
    w.name = training ? "translator-training" : "translator-forward";
    w.initial = b_.generate(spec_.seed, spec_.hidden);
    w.graph = std::move(b_.graph);
    w.layout = std::move(layout_);
    return w;
  }

 private:
  std::string tag(std::size_t t, std::size_t l, std::size_t p) const {
    return std::to_string(t) + "." + std::to_string(l) + "." + std::to_string(p);
  }

  std::size_t group_of(std::size_t layer) const {
    // Encoder l and decoder l share group l + 1.
    return (layer < enc_ ? layer : layer - enc_) + 1;
  }

  void forward() {
    const std::size_t H = spec_.hidden, B = spec_.batch;
    enc_ = spec_.encoders();
    dec_ = spec_.decoders();
    layers_ = enc_ + dec_;
    layout_.lstm_layers = layers_;
    for (std::size_t l = 0; l < layers_; ++l) {
      std::string kind = l < enc_ ? "enc" : "dec";
      std::size_t idx = (l < enc_ ? l : l - enc_) + 1;
      layout_.weights.push_back(
          b_.matrix("W_" + kind + std::to_string(idx), 2 * H, 4 * H, MatrixRole::weight, GraphBuilder::Fill::weight));
      layout_.h0.push_back(b_.matrix("h0_" + std::to_string(l), B, H, MatrixRole::state, GraphBuilder::Fill::zero));
      layout_.c0.push_back(b_.matrix("c0_" + std::to_string(l), B, H, MatrixRole::state, GraphBuilder::Fill::zero));
    }
    if (dec_ > 0)
      layout_.attention_weight = b_.matrix("W_att", 2 * H, H, MatrixRole::weight, GraphBuilder::Fill::weight);

    const bool single = spec_.layers == 1;
    const std::size_t enc_positions = single ? spec_.micro_steps() : spec_.src_len;
    for (std::size_t t = 0; t < spec_.time_steps; ++t) {
      layout_.x.emplace_back();
      layout_.targets.emplace_back();
      layout_.attention.emplace_back();
      layout_.h.emplace_back(layers_, std::vector<MatrixId>(single ? enc_positions : 0));
      layout_.c.emplace_back(layers_, std::vector<MatrixId>(single ? enc_positions : 0));
      for (std::size_t l = 0; l < layers_; ++l) {
        std::size_t n = l < enc_ ? enc_positions : spec_.dst_len;
        layout_.h[t][l].assign(n, kNoMatrix);
        layout_.c[t][l].assign(n, kNoMatrix);
      }
      for (std::size_t p = 0; p < enc_positions; ++p)
        layout_.x[t].push_back(b_.matrix("x" + std::to_string(t) + "." + std::to_string(p), B, H, MatrixRole::input,
                                         GraphBuilder::Fill::data));
      for (std::size_t j = 0; j < spec_.dst_len; ++j)
        layout_.targets[t].push_back(b_.matrix("y" + std::to_string(t) + "." + std::to_string(j), B, H,
                                               MatrixRole::input, GraphBuilder::Fill::data));

      for (std::size_t p = 0; p < enc_positions; ++p)
        for (std::size_t l = 0; l < enc_; ++l) {
          MatrixId in = l == 0 ? layout_.x[t][p] : layout_.h[t][l - 1][p];
          lstm_step(l, t, p, p, in);
        }
      if (single) continue;
      for (std::size_t j = 0; j < spec_.dst_len; ++j) {
        const std::size_t micro = spec_.src_len + j;
        MatrixId e_last = layout_.h[t][enc_ - 1][spec_.src_len - 1];
        MatrixId e_j = layout_.h[t][enc_ - 1][j % spec_.src_len];
        MatrixId out = b_.matrix("P" + std::to_string(t) + "." + std::to_string(j), B, H, MatrixRole::state);
        OpNode n;
        n.kind = NodeKind::matmul;
        n.label = "attention t" + std::to_string(t) + " j" + std::to_string(j);
        n.a = Operand{{e_last, e_j}, false};
        n.b = Operand{{layout_.attention_weight}, false};
        n.post = PostOp::tanh;
        n.out = {out};
        n.time_step = t;
        n.micro_step = micro;
        n.layer = enc_;
        n.mapping_group = 0;
        b_.add(std::move(n));
        layout_.attention[t].push_back(out);
        attention_.push_back({t, j, micro, e_last, e_j, out});
        items_.push_back({true, attention_.size() - 1});
        for (std::size_t l = enc_; l < layers_; ++l) {
          MatrixId in = l == enc_ ? out : layout_.h[t][l - 1][j];
          lstm_step(l, t, j, micro, in);
        }
      }
    }
  }

  void lstm_step(std::size_t l, std::size_t t, std::size_t p, std::size_t micro, MatrixId in) {
    const std::size_t H = spec_.hidden, B = spec_.batch;
    const auto& hs = layout_.h;
    const auto& cs = layout_.c;
    MatrixId hp, cp;
    if (p > 0) {
      hp = hs[t][l][p - 1];
      cp = cs[t][l][p - 1];
    } else if (t > 0) {
      hp = hs[t - 1][l].back();
      cp = cs[t - 1][l].back();
    } else {
      hp = layout_.h0[l];
      cp = layout_.c0[l];
    }
    const std::size_t group = group_of(l);
    MatrixId gates = b_.matrix("G" + tag(t, l, p), B, 4 * H, MatrixRole::state);
    OpNode mm;
    mm.kind = NodeKind::matmul;
    mm.label = "lstm l" + std::to_string(l) + " t" + std::to_string(t) + " p" + std::to_string(p);
    mm.a = Operand{{in, hp}, false};
    mm.b = Operand{{layout_.weights[l]}, false};
    mm.post = PostOp::lstm_gates;
    mm.out = {gates};
    mm.time_step = t;
    mm.micro_step = micro;
    mm.layer = l;
    mm.mapping_group = group;
    b_.add(std::move(mm));

    MatrixId h = b_.matrix("h" + tag(t, l, p), B, H, MatrixRole::state);
    MatrixId c = b_.matrix("c" + tag(t, l, p), B, H, MatrixRole::state);
    OpNode cell;
    cell.kind = NodeKind::aggregate_activate;
    cell.label = "cell l" + std::to_string(l) + " t" + std::to_string(t) + " p" + std::to_string(p);
    cell.op = ElementwiseOp::lstm_cell;
    cell.inputs = {gates, cp};
    cell.out = {h, c};
    cell.time_step = t;
    cell.micro_step = micro;
    cell.layer = l;
    cell.mapping_group = group;
    b_.add(std::move(cell));
    layout_.h[t][l][p] = h;
    layout_.c[t][l][p] = c;
    cells_.push_back({l, t, p, micro, group, in, hp, cp, gates, h, c});
    items_.push_back({false, cells_.size() - 1});
  }

  void backward() {
    const std::size_t H = spec_.hidden, B = spec_.batch;
    std::map<MatrixId, std::vector<MatrixId>> dh;  // h -> gradient contributions
    std::map<MatrixId, MatrixId> dc;               // c -> gradient from the next position
    std::vector<std::pair<MatrixId, MatrixId>> grads;  // (weight, dW part)
    const bool single = spec_.layers == 1;
    const std::size_t top = layers_ - 1;

    for (std::size_t t = spec_.time_steps; t-- > 0;) {
      for (std::size_t j = 0; j < spec_.dst_len; ++j) {
        std::size_t pos = single ? spec_.src_len + j : j;
        MatrixId h = layout_.h[t][top][pos];
        MatrixId d = b_.matrix("dL" + tag(t, top, pos), B, H, MatrixRole::error);
        OpNode n;
        n.kind = NodeKind::aggregate_activate;
        n.label = "loss t" + std::to_string(t) + " j" + std::to_string(j);
        n.op = ElementwiseOp::loss_grad;
        n.inputs = {h, layout_.targets[t][j]};
        n.out = {d};
        n.time_step = t;
        n.micro_step = single ? pos : spec_.src_len + j;
        n.layer = top;
        n.backward = true;
        n.mapping_group = group_of(top);
        b_.add(std::move(n));
        dh[h].push_back(d);
      }
      for (std::size_t i = items_.size(); i-- > 0;) {
        const auto& item = items_[i];
        if (item.attention) {
          const auto& a = attention_[item.index];
          if (a.t != t) continue;
          attention_backward(a, dh, grads);
        } else {
          const auto& c = cells_[item.index];
          if (c.t != t) continue;
          cell_backward(c, dh, dc, grads);
        }
      }
    }
    for (const auto& [w, g] : grads) {
      OpNode n;
      n.kind = NodeKind::weight_update;
      n.label = "sgd " + b_.graph.matrix(w).name + " <- " + b_.graph.matrix(g).name;
      n.op = ElementwiseOp::sgd;
      n.inputs = {w, g};
      n.out = {w};
      n.eta = spec_.eta;
      n.backward = true;
      n.mapping_group = w == layout_.attention_weight ? 0 : group_of(weight_layer(w));
      n.layer = w == layout_.attention_weight ? enc_ : weight_layer(w);
      b_.add(std::move(n));
    }
  }

  std::size_t weight_layer(MatrixId w) const {
    for (std::size_t l = 0; l < layout_.weights.size(); ++l)
      if (layout_.weights[l] == w) return l;
    throw GraphError("unknown weight");
  }

  void cell_backward(const Cell& c, std::map<MatrixId, std::vector<MatrixId>>& dh, std::map<MatrixId, MatrixId>& dc,
                     std::vector<std::pair<MatrixId, MatrixId>>& grads) {
    const std::size_t H = spec_.hidden, B = spec_.batch;
    auto contrib = dh[c.h];
    if (contrib.empty()) throw GraphError("hidden state without a gradient: " + b_.graph.matrix(c.h).name);
    auto it = dc.find(c.c);
    MatrixId dc_next = it == dc.end() ? kNoMatrix : it->second;
    const std::string tg = tag(c.t, c.layer, c.pos);

    MatrixId dz = b_.matrix("dZ" + tg, B, 4 * H, MatrixRole::error);
    MatrixId dcp = b_.matrix("dcp" + tg, B, H, MatrixRole::error);
    OpNode bw;
    bw.kind = NodeKind::aggregate_activate;
    bw.label = "cell-bwd l" + std::to_string(c.layer) + " t" + std::to_string(c.t) + " p" + std::to_string(c.pos);
    bw.op = ElementwiseOp::lstm_cell_backward;
    bw.inputs = {c.gates, c.c_prev, c.c, dc_next};
    bw.inputs.insert(bw.inputs.end(), contrib.begin(), contrib.end());
    bw.out = {dz, dcp};
    stamp(bw, c);
    b_.add(std::move(bw));

    MatrixId dx = b_.matrix("dx" + tg, B, H, MatrixRole::error);
    MatrixId dhp = b_.matrix("dhp" + tg, B, H, MatrixRole::error);
    OpNode em;
    em.kind = NodeKind::error_matmul;
    em.label = "error l" + std::to_string(c.layer) + " t" + std::to_string(c.t) + " p" + std::to_string(c.pos);
    em.a = Operand{{dz}, false};
    em.b = Operand{{layout_.weights[c.layer]}, true};
    em.out = {dx, dhp};
    stamp(em, c);
    b_.add(std::move(em));

    const MatrixId w = layout_.weights[c.layer];
    MatrixId dw = b_.matrix("dW" + tg, 2 * H, 4 * H, MatrixRole::error);
    OpNode wg;
    wg.kind = NodeKind::matmul;
    wg.label = "wgrad l" + std::to_string(c.layer) + " t" + std::to_string(c.t) + " p" + std::to_string(c.pos);
    wg.a = Operand{{c.in, c.h_prev}, true};
    wg.b = Operand{{dz}, false};
    wg.out = {dw};
    stamp(wg, c);
    b_.add(std::move(wg));

    dh[c.in].push_back(dx);
    dh[c.h_prev].push_back(dhp);
    dc[c.c_prev] = dcp;
    layout_.weight_grads[w].push_back(dw);
    grads.emplace_back(w, dw);
  }

  void attention_backward(const AttentionStep& a, std::map<MatrixId, std::vector<MatrixId>>& dh,
                          std::vector<std::pair<MatrixId, MatrixId>>& grads) {
    const std::size_t H = spec_.hidden, B = spec_.batch;
    auto contrib = dh[a.out];
    if (contrib.empty()) throw GraphError("attention output without a gradient");
    const std::string tg = std::to_string(a.t) + "." + std::to_string(a.j);
    auto stamp_att = [&](OpNode& n) {
      n.time_step = a.t;
      n.micro_step = a.micro;
      n.layer = enc_;
      n.backward = true;
      n.mapping_group = 0;
    };
    MatrixId dpre = b_.matrix("dPpre" + tg, B, H, MatrixRole::error);
    OpNode tb;
    tb.kind = NodeKind::aggregate_activate;
    tb.label = "attention-bwd t" + std::to_string(a.t) + " j" + std::to_string(a.j);
    tb.op = ElementwiseOp::tanh_backward;
    tb.inputs = {a.out};
    tb.inputs.insert(tb.inputs.end(), contrib.begin(), contrib.end());
    tb.out = {dpre};
    stamp_att(tb);
    b_.add(std::move(tb));

    MatrixId de_last = b_.matrix("dElast" + tg, B, H, MatrixRole::error);
    MatrixId de_j = b_.matrix("dEj" + tg, B, H, MatrixRole::error);
    OpNode em;
    em.kind = NodeKind::error_matmul;
    em.label = "attention-error t" + std::to_string(a.t) + " j" + std::to_string(a.j);
    em.a = Operand{{dpre}, false};
    em.b = Operand{{layout_.attention_weight}, true};
    em.out = {de_last, de_j};
    stamp_att(em);
    b_.add(std::move(em));

    MatrixId dw = b_.matrix("dWatt" + tg, 2 * H, H, MatrixRole::error);
    OpNode wg;
    wg.kind = NodeKind::matmul;
    wg.label = "attention-wgrad t" + std::to_string(a.t) + " j" + std::to_string(a.j);
    wg.a = Operand{{a.e_last, a.e_j}, true};
    wg.b = Operand{{dpre}, false};
    wg.out = {dw};
    stamp_att(wg);
    b_.add(std::move(wg));

    dh[a.e_last].push_back(de_last);
    dh[a.e_j].push_back(de_j);
    layout_.weight_grads[layout_.attention_weight].push_back(dw);
    grads.emplace_back(layout_.attention_weight, dw);
  }

  void stamp(OpNode& n, const Cell& c) const {
    n.time_step = c.t;
    n.micro_step = c.micro;
    n.layer = c.layer;
    n.backward = true;
    n.mapping_group = c.group;
  }

  TranslatorSpec spec_;
  GraphBuilder b_;
  TranslatorLayout layout_;
  std::size_t enc_ = 0, dec_ = 0, layers_ = 0;
  std::vector<Cell> cells_;
  std::vector<AttentionStep> attention_;
  std::vector<ForwardItem> items_;
};

}  // namespace

Workload build_translator_forward(const TranslatorSpec& spec) { return TranslatorBuilder(spec).build(false); }
Workload build_translator_training(const TranslatorSpec& spec) { return TranslatorBuilder(spec).build(true); }

// ---------------------------------------------------------------------------

std::size_t ConvSpec::out_h() const {
  if (height + 2 * padding < kernel_h) throw GraphError("kernel taller than the padded input");
  return (height + 2 * padding - kernel_h) / stride + 1;
}

std::size_t ConvSpec::out_w() const {
  if (width + 2 * padding < kernel_w) throw GraphError("kernel wider than the padded input");
  return (width + 2 * padding - kernel_w) / stride + 1;
}

ConvSpec conv_spec(const SystemConfig& cfg) {
  ConvSpec s;
  s.batch = cfg.batch_size;
  s.channels = cfg.workload.channels;
  s.height = cfg.workload.height;
  s.width = cfg.workload.width;
  s.kernels = cfg.workload.kernels;
  s.kernel_h = cfg.workload.kernel_h;
  s.kernel_w = cfg.workload.kernel_w;
  s.stride = cfg.workload.stride;
  s.padding = cfg.workload.padding;
  s.seed = cfg.seed;
  return s;
}

namespace {

// Calls f(row, col, input_index or -1) for every entry of the lowered matrix.
template <class F>
void for_each_patch_entry(const ConvSpec& s, F&& f) {
  const std::size_t oh = s.out_h(), ow = s.out_w();
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t row = (n * oh + oy) * ow + ox;
        for (std::size_t c = 0; c < s.channels; ++c)
          for (std::size_t ky = 0; ky < s.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
              const std::size_t col = (c * s.kernel_h + ky) * s.kernel_w + kx;
              const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.padding);
              const long ix = static_cast<long>(ox * s.stride + kx) - static_cast<long>(s.padding);
              long src = -1;
              if (iy >= 0 && ix >= 0 && iy < static_cast<long>(s.height) && ix < static_cast<long>(s.width))
                src = static_cast<long>(((n * s.channels + c) * s.height + static_cast<std::size_t>(iy)) * s.width +
                                        static_cast<std::size_t>(ix));
              f(row, col, src);
            }
      }
}

}  // namespace

std::uint64_t Im2Col::duplicated_elements() const {
  std::uint64_t n = 0;
  for (auto c : copies) n += c;
  return n;
}

Im2Col im2col(const ConvSpec& s) {
  if (s.batch < 1 || s.channels < 1 || s.height < 1 || s.width < 1 || s.kernels < 1 || s.kernel_h < 1 ||
      s.kernel_w < 1 || s.stride < 1)
    throw GraphError("invalid conv spec");
  Im2Col out;
  const std::size_t rows = s.out_h() * s.out_w() * s.batch;
  const std::size_t patch = s.channels * s.kernel_h * s.kernel_w;
  out.a.name = "A_im2col";
  out.a.rows = rows;
  out.a.cols = patch;
  out.a.role = MatrixRole::input;
  out.b.name = "kernels";
  out.b.rows = patch;
  out.b.cols = s.kernels;
  out.b.role = MatrixRole::weight;
  out.copies.assign(s.batch * s.channels * s.height * s.width, 0);
  for_each_patch_entry(s, [&](std::size_t, std::size_t, long src) {
    if (src >= 0) ++out.copies[static_cast<std::size_t>(src)];
  });
  return out;
}

MatrixF im2col_values(const ConvSpec& s, const MatrixF& input) {
  if (input.rows() != s.batch || input.cols() != s.channels * s.height * s.width)
    throw GraphError("conv input tensor has the wrong shape");
  MatrixF a(s.out_h() * s.out_w() * s.batch, s.channels * s.kernel_h * s.kernel_w);
  for_each_patch_entry(s, [&](std::size_t r, std::size_t c, long src) {
    if (src >= 0) a(r, c) = input.data()[static_cast<std::size_t>(src)];
  });
  return a;
}

MatrixF conv_kernel_matrix(const ConvSpec& s, const MatrixF& kernels) {
  if (kernels.rows() != s.kernels || kernels.cols() != s.channels * s.kernel_h * s.kernel_w)
    throw GraphError("kernel tensor has the wrong shape");
  return kernels.transposed();
}

Workload build_conv(const ConvSpec& s, unsigned element_width) {
  auto lowered = im2col(s);
  Workload w;
  w.name = "conv";
  auto a = w.graph.add_matrix(lowered.a.name, lowered.a.rows, lowered.a.cols, MatrixRole::input, element_width);
  auto b = w.graph.add_matrix(lowered.b.name, lowered.b.rows, lowered.b.cols, MatrixRole::weight, element_width);
  auto c = w.graph.add_matrix("conv_out", lowered.a.rows, s.kernels, MatrixRole::output, element_width);
  OpNode n;
  n.kind = NodeKind::matmul;
  n.label = "conv";
  n.a = Operand{{a}, false};
  n.b = Operand{{b}, false};
  n.out = {c};
  w.graph.add_node(std::move(n));

  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  MatrixF input(s.batch, s.channels * s.height * s.width);
  for (auto& v : input.data()) v = d(rng);
  MatrixF kernels(s.kernels, s.channels * s.kernel_h * s.kernel_w);
  for (auto& v : kernels.data()) v = d(rng);
  w.initial.emplace(a, im2col_values(s, input));
  w.initial.emplace(b, conv_kernel_matrix(s, kernels));
  w.lowering_bytes = lowered.duplicated_elements() * ((element_width + 7) / 8);
  w.lowered_matrix = a;
  return w;
}

Workload build_workload(const SystemConfig& cfg) {
  if (cfg.workload.kind == WorkloadKind::conv) return build_conv(conv_spec(cfg), cfg.slice.element_width);
  auto spec = translator_spec(cfg);
  return cfg.workload.training ? build_translator_training(spec) : build_translator_forward(spec);
}

std::uint64_t unique_bytes(const OpGraph& graph) {
  std::set<MatrixId> touched;
  auto base = [&](MatrixId id) { return graph.matrix(id).view_of.value_or(id); };
  for (const auto& n : graph.nodes()) {
    for (auto p : n.a.parts) touched.insert(base(p));
    for (auto p : n.b.parts) touched.insert(base(p));
    for (auto p : n.inputs)
      if (p != kNoMatrix) touched.insert(base(p));
    for (auto p : n.out) touched.insert(base(p));
  }
  std::uint64_t bytes = 0;
  for (auto id : touched) {
    const auto& d = graph.matrix(id);
    bytes += static_cast<std::uint64_t>(d.rows) * d.cols * ((d.element_width + 7) / 8);
  }
  return bytes;
}

double intensity(const OpGraph& graph) {
  if (graph.empty()) throw GraphError("intensity of an empty graph");
  auto bytes = unique_bytes(graph);
  if (bytes == 0) throw GraphError("intensity of a graph that touches no memory");
  return graph.total_flops() / static_cast<double>(bytes);
}

}  // namespace mslice
