#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mslice/config.hpp"
#include "mslice/graph.hpp"
#include "mslice/matrix.hpp"

namespace mslice {

/// Attention translator: `encoders` LSTM encoders, a feed-forward attention
/// layer and `decoders` LSTM decoders; with layers == 1 a single LSTM layer
/// runs over all src_len + dst_len positions.
struct TranslatorSpec {
  std::size_t hidden = 4;
  std::size_t layers = 5;
  std::size_t batch = 4;
  std::size_t src_len = 2;
  std::size_t dst_len = 2;
  std::size_t time_steps = 1;
  double eta = 0.01;
  std::uint64_t seed = 1;

  std::size_t encoders() const noexcept { return layers == 1 ? 1 : (layers - 1) / 2; }
  std::size_t decoders() const noexcept { return layers == 1 ? 0 : layers - 1 - encoders(); }
  std::size_t micro_steps() const noexcept { return src_len + dst_len; }
};

TranslatorSpec translator_spec(const SystemConfig& cfg);

/// Matrix ids of a built translator, for inspection and reference checks.
/// Layer index l runs over encoders first, then decoders.
struct TranslatorLayout {
  std::size_t lstm_layers = 0;
  std::vector<MatrixId> weights;  // per LSTM layer, 2H x 4H
  MatrixId attention_weight = kNoMatrix;
  std::vector<std::vector<MatrixId>> x;                   // [t][p] encoder-1 inputs
  std::vector<std::vector<MatrixId>> targets;             // [t][j] top-layer targets
  std::vector<std::vector<std::vector<MatrixId>>> h, c;   // [t][layer][position]
  std::vector<std::vector<MatrixId>> attention;           // [t][j] attention outputs
  std::map<MatrixId, std::vector<MatrixId>> weight_grads; // weight -> per-position dW
  std::vector<MatrixId> h0, c0;                           // zero initial states per layer
};

struct Workload {
  std::string name;
  OpGraph graph;
  /// Contents of every matrix no node produces (weights, inputs, targets,
  /// zero states), generated from the seed.
  std::map<MatrixId, MatrixF> initial;
  TranslatorLayout layout;
  /// Bytes the memory interface writes when materializing lowered operands
  /// (im2col duplicates); charged by the simulator before execution.
  std::uint64_t lowering_bytes = 0;
  MatrixId lowered_matrix = kNoMatrix;
};

Workload build_translator_forward(const TranslatorSpec& spec);
Workload build_translator_training(const TranslatorSpec& spec);

struct ConvSpec {
  std::size_t batch = 1;
  std::size_t channels = 1, height = 5, width = 5;
  std::size_t kernels = 1, kernel_h = 3, kernel_w = 3;
  std::size_t stride = 1, padding = 0;
  std::uint64_t seed = 1;

  std::size_t out_h() const;
  std::size_t out_w() const;
};

ConvSpec conv_spec(const SystemConfig& cfg);

/// Input tensor stored as batch x (channels * height * width), row-major
/// over (c, y, x) inside a row. Kernels as kernels x (channels * kh * kw).
struct Im2Col {
  MatrixDescriptor a;  // (out_h * out_w * batch) x (channels * kh * kw)
  MatrixDescriptor b;  // (channels * kh * kw) x kernels
  /// copies[n][(c * height + y) * width + x]: how many A entries replicate
  /// that input element. Padding entries are zeros and copy nothing.
  std::vector<std::uint32_t> copies;
  std::uint64_t duplicated_elements() const;
};

/// Throws GraphError when the kernel exceeds the padded input.
Im2Col im2col(const ConvSpec& spec);
/// Lowered patch matrix for a given input tensor.
MatrixF im2col_values(const ConvSpec& spec, const MatrixF& input);
MatrixF conv_kernel_matrix(const ConvSpec& spec, const MatrixF& kernels);
Workload build_conv(const ConvSpec& spec, unsigned element_width = 16);

/// Workload named by the config's workload block.
Workload build_workload(const SystemConfig& cfg);

/// Total FLOPs over unique bytes touched (each stored matrix counted once).
/// Throws GraphError for an empty graph.
double intensity(const OpGraph& graph);
std::uint64_t unique_bytes(const OpGraph& graph);

}  // namespace mslice
