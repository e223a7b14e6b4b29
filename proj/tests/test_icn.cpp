#include <doctest.h>

#include <algorithm>
#include <random>

#include "mslice/icn.hpp"

using namespace mslice;

TEST_CASE("route latency") {
  IcnConfig icn;
  auto local = route(5, 5, 3, icn);
  CHECK(local.hops == 0);
  CHECK(local.latency == 1.0);

  // Header plus one payload flit over 3 hops.
  auto r = route(0, 3, 2, icn);
  CHECK(r.hops == 3);
  CHECK(r.latency == 8.0);

  CHECK(route(0, 255, 1, icn).hops == 30);
  CHECK(route(255, 0, 1, icn).hops == 30);
  CHECK(route_links(0, 255, icn).size() == 30);
}

TEST_CASE("mesh coordinates") {
  IcnConfig icn;
  CHECK(mesh_coord(0, icn).x == 0);
  CHECK(mesh_coord(17, icn).x == 1);
  CHECK(mesh_coord(17, icn).y == 1);
}

TEST_CASE("dimension-order routing cannot deadlock") {
  IcnConfig icn;
  CHECK(channel_dependencies_acyclic(icn));
  icn.mesh_x = 3;
  icn.mesh_y = 5;
  CHECK(channel_dependencies_acyclic(icn));
}

TEST_CASE("payload flits") {
  CHECK(payload_flits(0, 16, 128) == 0);
  CHECK(payload_flits(1, 16, 128) == 1);
  CHECK(payload_flits(8, 16, 128) == 1);
  CHECK(payload_flits(9, 16, 128) == 2);
  CHECK(payload_flits(32, 16, 128) == 4);
}

TEST_CASE("coalescing") {
  IcnConfig icn;

  SUBCASE("diagonal run") {
    auto ps = coalesce(1, 2, 7, {{0, 2, 1.f}, {1, 3, 2.f}, {2, 4, 3.f}}, icn, 16);
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].first_row == 0);
    CHECK(ps[0].first_col == 2);
    CHECK(ps[0].count == 3);
    CHECK(ps[0].pattern == IndexPattern::diagonal);
    CHECK(ps[0].payload == std::vector<float>{1.f, 2.f, 3.f});
  }

  SUBCASE("single element") {
    auto ps = coalesce(0, 1, 0, {{4, 4, 1.f}}, icn, 16);
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].count == 1);
    CHECK(ps[0].flits() == 2);
  }

  SUBCASE("greedy split at max payload") {
    std::vector<IndexedValue> row;
    for (std::size_t c = 0; c < 40; ++c) row.push_back({0, c, float(c)});
    auto ps = coalesce(0, 1, 0, row, icn, 16);
    REQUIRE(ps.size() == 2);
    CHECK(ps[0].count == 32);
    CHECK(ps[1].count == 8);
    CHECK(ps[1].first_col == 32);
  }

  SUBCASE("nothing to send") { CHECK(coalesce(0, 1, 0, {}, icn, 16).empty()); }
}

TEST_CASE("receiver reconstructs the sender's indices") {
  IcnConfig icn;
  icn.max_payload = 5;
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<IndexedValue> msgs;
    std::vector<std::pair<std::size_t, std::size_t>> sent;
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 6; ++c)
        if (rng() % 3 == 0) {
          msgs.push_back({r, c, float(r * 10 + c)});
          sent.emplace_back(r, c);
        }
    std::shuffle(msgs.begin(), msgs.end(), rng);
    auto ps = coalesce(0, 1, 0, msgs, icn, 16);
    std::vector<std::pair<std::size_t, std::size_t>> got;
    for (const auto& p : ps) {
      CHECK(p.count <= icn.max_payload);
      auto idx = reconstruct_indices(p);
      REQUIRE(idx.size() == p.count);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(p.payload[i] == float(idx[i].first * 10 + idx[i].second));
        got.push_back(idx[i]);
      }
    }
    std::sort(got.begin(), got.end());
    CHECK(got == sent);
  }
}

TEST_CASE("network timing") {
  IcnConfig icn;

  SUBCASE("isolated packets match route") {
    Network net(icn, 16);
    auto a = net.send(0, 3, 4, 0.0);
    auto b = net.send(16 - 1, 12, 4, 0.0);  // no shared links
    CHECK(a.latency() == route(0, 3, 4, icn).latency);
    CHECK(b.latency() == route(15, 12, 4, icn).latency);
  }

  SUBCASE("contention delays by the first packet's flits") {
    Network net(icn, 16);
    auto first = net.send(0, 2, 3, 0.0);
    auto second = net.send(1, 2, 3, 0.0);  // shares link 1->2
    CHECK(first.latency() == route(0, 2, 3, icn).latency);
    CHECK(second.latency() == route(1, 2, 3, icn).latency + 3);
  }

  SUBCASE("local delivery") {
    Network net(icn, 4);
    CHECK(net.send(2, 2, 5, 10.0).delivered == 11.0);
  }

  SUBCASE("empty network") {
    Network net(icn, 4);
    CHECK(net.drain().empty());
    CHECK(net.stats().packets == 0);
    CHECK(net.stats().max_latency == 0.0);
  }

  SUBCASE("drain order and stats") {
    Network net(icn, 4);
    Packet p;
    p.src = 0;
    p.dst = 3;
    p.payload_flits = 2;
    net.inject(p, 5.0);
    p.src = 1;
    net.inject(p, 0.0);
    auto out = net.drain();
    REQUIRE(out.size() == 2);
    CHECK(out[0].first.src == 1);
    CHECK(net.stats().packets == 2);
    CHECK(net.stats().flits == 6);
  }

  SUBCASE("flits are conserved on a busy link") {
    Network net(icn, 2);
    double last = 0;
    for (int i = 0; i < 100; ++i) last = std::max(last, net.send(0, 1, 4, 0.0).delivered);
    // 400 flits through a one-flit-per-cycle link.
    CHECK(last >= 400.0);
    CHECK(net.stats().max_link_flits == 400.0);
  }
}
