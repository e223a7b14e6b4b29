#include "mslice/icn.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <string>

namespace mslice {

unsigned payload_flits(std::size_t count, unsigned element_width, unsigned flit_width) {
  std::size_t bits = count * element_width;
  return static_cast<unsigned>((bits + flit_width - 1) / flit_width);
}

std::vector<Packet> coalesce(SliceId src, SliceId dst, MatrixId matrix, std::vector<IndexedValue> msgs,
                             const IcnConfig& icn, unsigned element_width) {
  std::sort(msgs.begin(), msgs.end(),
            [](const IndexedValue& a, const IndexedValue& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  const std::size_t n = msgs.size();
  const std::size_t cap = std::max<std::size_t>(1, icn.max_payload);
  std::vector<bool> sent(n, false);
  auto find = [&](std::size_t r, std::size_t c) -> std::size_t {
    auto it = std::lower_bound(msgs.begin(), msgs.end(), std::make_pair(r, c),
                               [](const IndexedValue& v, const std::pair<std::size_t, std::size_t>& key) {
                                 return std::make_pair(v.row, v.col) < key;
                               });
    if (it == msgs.end() || it->row != r || it->col != c) return n;
    return static_cast<std::size_t>(it - msgs.begin());
  };

  std::vector<Packet> out;
  std::vector<std::size_t> row_run, diag_run;
  for (std::size_t i = 0; i < n; ++i) {
    if (sent[i]) continue;
    row_run.assign(1, i);
    for (std::size_t j = i + 1; j < n && row_run.size() < cap; ++j) {
      if (sent[j] || msgs[j].row != msgs[i].row || msgs[j].col != msgs[j - 1].col + 1) break;
      row_run.push_back(j);
    }
    diag_run.assign(1, i);
    while (diag_run.size() < cap) {
      const auto& last = msgs[diag_run.back()];
      std::size_t j = find(last.row + 1, last.col + 1);
      if (j == n || sent[j]) break;
      diag_run.push_back(j);
    }
    const bool diagonal = diag_run.size() > row_run.size();
    const auto& run = diagonal ? diag_run : row_run;
    Packet p;
    p.src = src;
    p.dst = dst;
    p.matrix = matrix;
    p.first_row = msgs[i].row;
    p.first_col = msgs[i].col;
    p.count = run.size();
    p.pattern = diagonal ? IndexPattern::diagonal : IndexPattern::row;
    p.payload.reserve(run.size());
    for (auto j : run) {
      sent[j] = true;
      p.payload.push_back(msgs[j].value);
    }
    p.payload_flits = payload_flits(p.count, element_width, icn.flit_width);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> reconstruct_indices(const Packet& p) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(p.count);
  for (std::size_t i = 0; i < p.count; ++i) {
    if (p.pattern == IndexPattern::row)
      out.emplace_back(p.first_row, p.first_col + i);
    else
      out.emplace_back(p.first_row + i, p.first_col + i);
  }
  return out;
}

MeshCoord mesh_coord(SliceId slice, const IcnConfig& icn) {
  if (slice >= icn.mesh_x * icn.mesh_y) throw std::out_of_range("slice " + std::to_string(slice) + " is outside the mesh");
  return {slice % icn.mesh_x, slice / icn.mesh_x};
}

namespace {

enum Dir : std::size_t { east = 0, west = 1, south = 2, north = 3 };

std::size_t link_id(std::size_t x, std::size_t y, Dir d, const IcnConfig& icn) { return (y * icn.mesh_x + x) * 4 + d; }

}  // namespace

std::vector<std::size_t> route_links(SliceId src, SliceId dst, const IcnConfig& icn) {
  auto a = mesh_coord(src, icn);
  auto b = mesh_coord(dst, icn);
  std::vector<std::size_t> links;
  std::size_t x = a.x, y = a.y;
  while (x != b.x) {
    if (x < b.x) {
      links.push_back(link_id(x, y, east, icn));
      ++x;
    } else {
      links.push_back(link_id(x, y, west, icn));
      --x;
    }
  }
  while (y != b.y) {
    if (y < b.y) {
      links.push_back(link_id(x, y, south, icn));
      ++y;
    } else {
      links.push_back(link_id(x, y, north, icn));
      --y;
    }
  }
  return links;
}

RouteInfo route(SliceId src, SliceId dst, unsigned flits, const IcnConfig& icn) {
  auto a = mesh_coord(src, icn);
  auto b = mesh_coord(dst, icn);
  if (src == dst) return {1.0, 0};
  std::size_t hops = (a.x > b.x ? a.x - b.x : b.x - a.x) + (a.y > b.y ? a.y - b.y : b.y - a.y);
  double lat = static_cast<double>(hops) * (icn.router_latency + icn.link_latency) + flits;
  return {lat, hops};
}

RouteInfo route(const Packet& p, const IcnConfig& icn) { return route(p.src, p.dst, p.flits(), icn); }

bool channel_dependencies_acyclic(const IcnConfig& icn) {
  const std::size_t nodes = icn.mesh_x * icn.mesh_y;
  const std::size_t links = nodes * 4;
  std::vector<std::vector<std::size_t>> succ(links);
  for (SliceId s = 0; s < nodes; ++s)
    for (SliceId d = 0; d < nodes; ++d) {
      auto path = route_links(s, d, icn);
      for (std::size_t i = 1; i < path.size(); ++i) succ[path[i - 1]].push_back(path[i]);
    }
  std::vector<std::size_t> indeg(links, 0);
  for (auto& v : succ) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (auto t : v) ++indeg[t];
  }
  std::queue<std::size_t> ready;
  for (std::size_t l = 0; l < links; ++l)
    if (indeg[l] == 0) ready.push(l);
  std::size_t seen = 0;
  while (!ready.empty()) {
    auto l = ready.front();
    ready.pop();
    ++seen;
    for (auto t : succ[l])
      if (--indeg[t] == 0) ready.push(t);
  }
  return seen == links;
}

Network::Network(const IcnConfig& icn, std::size_t num_slices) : icn_(icn), slices_(num_slices) {
  if (num_slices > icn.mesh_x * icn.mesh_y) throw std::invalid_argument("more slices than mesh nodes");
  reset();
}

void Network::reset() {
  constexpr double bucket = 16.0;
  links_.assign(icn_.mesh_x * icn_.mesh_y * 4, BandwidthLedger(1.0, bucket));
  link_flits_.assign(links_.size(), 0.0);
  inject_.assign(slices_, BandwidthLedger(1.0, bucket));
  eject_.assign(slices_, BandwidthLedger(1.0, bucket));
  queue_.clear();
  rr_ = 0;
  stats_ = NetworkStats{};
}

Delivery Network::send(SliceId src, SliceId dst, unsigned flits, double ready, std::uint64_t id) {
  if (src >= slices_ || dst >= slices_) throw std::out_of_range("packet endpoint outside the system");
  Delivery dv;
  dv.packet = id;
  dv.injected = ready;
  ++stats_.packets;
  stats_.flits += flits;
  stats_.delivered_flits += flits;
  if (src == dst) {
    dv.delivered = ready + 1.0;
    stats_.total_latency += 1.0;
    stats_.max_latency = std::max(stats_.max_latency, 1.0);
    return dv;
  }
  const auto links = route_links(src, dst, icn_);
  const double hop = icn_.router_latency + icn_.link_latency;
  const double f = flits;
  // Head time at each stage is the booking's finish minus the flits it took.
  double head = inject_[src].transfer(ready, f) - f;
  for (auto l : links) {
    head = links_[l].transfer(head, f) - f + hop;
    link_flits_[l] += f;
    stats_.max_link_flits = std::max(stats_.max_link_flits, link_flits_[l]);
  }
  dv.delivered = eject_[dst].transfer(head, f);
  dv.hops = links.size();
  double lat = dv.latency();
  stats_.total_latency += lat;
  stats_.max_latency = std::max(stats_.max_latency, lat);
  return dv;
}

void Network::inject(Packet packet, double ready) { queue_.emplace_back(std::move(packet), ready); }

std::vector<std::pair<Packet, Delivery>> Network::drain() {
  const std::size_t n = slices_ ? slices_ : 1;
  const std::size_t rr = rr_;
  std::stable_sort(queue_.begin(), queue_.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return (a.first.src + n - rr) % n < (b.first.src + n - rr) % n;
  });
  std::vector<std::pair<Packet, Delivery>> out;
  out.reserve(queue_.size());
  for (auto& [p, ready] : queue_) {
    auto dv = send(p.src, p.dst, p.flits(), ready, p.id);
    out.emplace_back(std::move(p), dv);
  }
  queue_.clear();
  rr_ = (rr_ + 1) % n;
  return out;
}

}  // namespace mslice
