#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "mslice/config.hpp"
#include "mslice/graph.hpp"
#include "mslice/ledger.hpp"

namespace mslice {

using SliceId = std::uint32_t;

/// How a receiver expands (first_index, count) into element indices.
enum class IndexPattern : std::uint8_t { row, diagonal };

struct Packet {
  std::uint64_t id = 0;
  SliceId src = 0, dst = 0;
  MatrixId matrix = kNoMatrix;
  std::size_t first_row = 0, first_col = 0;
  std::size_t count = 1;
  IndexPattern pattern = IndexPattern::row;
  std::vector<float> payload;  // empty when only timing is simulated
  unsigned header_flits = 1;
  unsigned payload_flits = 0;

  unsigned flits() const noexcept { return header_flits + payload_flits; }
};

unsigned payload_flits(std::size_t count, unsigned element_width, unsigned flit_width);

struct IndexedValue {
  std::size_t row = 0, col = 0;
  float value = 0.0f;
};

/// Greedy packetization of the messages for one destination. Walking the
/// messages in (row, col) order, each packet takes the longer of the
/// row-contiguous or diagonal run of not-yet-sent elements starting at the
/// first unsent one (ties go to the row pattern), capped at max_payload.
std::vector<Packet> coalesce(SliceId src, SliceId dst, MatrixId matrix, std::vector<IndexedValue> messages,
                             const IcnConfig& icn, unsigned element_width);

/// Indices a receiver derives from a packet header.
std::vector<std::pair<std::size_t, std::size_t>> reconstruct_indices(const Packet& packet);

struct MeshCoord {
  std::size_t x = 0, y = 0;
};
MeshCoord mesh_coord(SliceId slice, const IcnConfig& icn);

struct RouteInfo {
  double latency = 0.0;
  std::size_t hops = 0;
};
/// Isolated (contention-free) latency of a packet of `flits` flits.
RouteInfo route(SliceId src, SliceId dst, unsigned flits, const IcnConfig& icn);
RouteInfo route(const Packet& packet, const IcnConfig& icn);

/// Directed links crossed by the X-then-Y path, as link ids.
std::vector<std::size_t> route_links(SliceId src, SliceId dst, const IcnConfig& icn);
/// True when the channel dependency graph of dimension-order routing on the
/// mesh has no cycle (so wormhole routing cannot deadlock).
bool channel_dependencies_acyclic(const IcnConfig& icn);

struct NetworkStats {
  std::uint64_t packets = 0;
  std::uint64_t flits = 0;
  std::uint64_t delivered_flits = 0;
  double total_latency = 0.0;
  double max_latency = 0.0;
  double max_link_flits = 0.0;  // busiest link's flit count

  double mean_latency() const noexcept { return packets ? total_latency / static_cast<double>(packets) : 0.0; }
};

struct Delivery {
  std::uint64_t packet = 0;
  double injected = 0.0;
  double delivered = 0.0;
  std::size_t hops = 0;
  double latency() const noexcept { return delivered - injected; }
};

/// Mesh with dimension-order routing. Each link, injection port and ejection
/// port carries one flit per cycle and is booked through a bandwidth ledger:
/// a packet's flits pipeline hop by hop behind the head and take the earliest
/// free link capacity, so contention delays packets without a global event
/// order.
class Network {
 public:
  Network(const IcnConfig& icn, std::size_t num_slices);

  /// Routes one packet ready at `ready` and reserves its links.
  Delivery send(SliceId src, SliceId dst, unsigned flits, double ready, std::uint64_t id = 0);

  /// Queue a packet; drain() routes all queued packets in order of readiness,
  /// breaking ties round-robin over source slices.
  void inject(Packet packet, double ready);
  std::vector<std::pair<Packet, Delivery>> drain();

  const NetworkStats& stats() const noexcept { return stats_; }
  void reset();

 private:
  IcnConfig icn_;
  std::size_t slices_;
  std::vector<BandwidthLedger> links_;
  std::vector<double> link_flits_;
  std::vector<BandwidthLedger> inject_, eject_;
  std::vector<std::pair<Packet, double>> queue_;
  std::size_t rr_ = 0;
  NetworkStats stats_;
};

}  // namespace mslice
