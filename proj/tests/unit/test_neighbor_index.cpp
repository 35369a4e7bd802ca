#include <doctest.h>

#include <advtext/error.hpp>
#include <advtext/neighbor_index.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"

using namespace advtext;

namespace {

// rows followed by an eos row
Tensor2 dictionary(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t dim = rows.begin()->size();
  Tensor2 t(rows.size() + 1, dim, 0.5);
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (double v : row) t(r, c++) = v;
    ++r;
  }
  return t;
}

}  // namespace

TEST_CASE("three word example") {
  const auto e = dictionary({{1, 0}, {0.9, 0.1}, {0, 1}});
  const auto idx = build_index(e, 1);
  CHECK(idx.entry(1).neighbors == std::vector<TokenId>{2});
  CHECK(idx.entry(2).neighbors == std::vector<TokenId>{1});
  CHECK(idx.entry(3).neighbors == std::vector<TokenId>{2});
  CHECK_FALSE(idx.covers(4));  // eos
}

TEST_CASE("directions are unit vectors pointing at the neighbour") {
  std::mt19937_64 rng(5);
  Tensor2 e(40, 6);
  advtext::testing::fill_gaussian(e, rng, 1.0);
  const auto idx = build_index(e, 5);
  for (TokenId w = 1; w <= 39; ++w) {
    const auto& en = idx.entry(w);
    REQUIRE(en.neighbors.size() == 5);
    for (std::size_t s = 0; s < 5; ++s) {
      CHECK(en.neighbors[s] != w);
      CHECK(en.neighbors[s] != 40);
      const auto u = en.directions.row(s);
      CHECK(l2_norm(u) == doctest::Approx(1.0).epsilon(1e-12));
      const auto vi = e.row(w - 1);
      const auto vj = e.row(en.neighbors[s] - 1);
      std::vector<double> diff(6);
      for (std::size_t c = 0; c < 6; ++c) diff[c] = vj[c] - vi[c];
      CHECK(dot(diff, u) == doctest::Approx(l2_norm(diff)).epsilon(1e-12));
      if (s > 0) CHECK(en.cosines[s - 1] >= en.cosines[s]);
    }
  }
}

TEST_CASE("brute-force agreement with ties and duplicates") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor2 e(30, 4);
    std::uniform_int_distribution<int> coord(-3, 3);
    for (std::size_t r = 0; r + 1 < e.rows(); ++r) {
      do {
        for (double& v : e.row(r)) v = coord(rng);
      } while (l2_norm(e.row(r)) == 0.0);
    }
    // exact duplicate and a power-of-two multiple give exact cosine ties
    for (std::size_t c = 0; c < 4; ++c) {
      e(5, c) = e(2, c);
      e(9, c) = 2.0 * e(2, c);
    }
    const std::size_t k = 1 + trial % 8;
    const auto idx = build_index(e, k);
    const auto brute = advtext::testing::brute_force_neighbors(e, k);
    for (TokenId w = 1; w < e.rows(); ++w) {
      CHECK(idx.entry(w).neighbors == brute[w - 1].ids);
    }
  }
}

TEST_CASE("degenerate rows and bad k") {
  auto zero = dictionary({{1, 0}, {0, 0}, {0, 1}});
  CHECK_THROWS_AS(build_index(zero, 1), Error);
  const auto e = dictionary({{1, 0}, {0, 1}});
  CHECK_THROWS_AS(build_index(e, 2), Error);
  CHECK_THROWS_AS(build_index(e, 0), Error);
}

TEST_CASE("refresh cadence") {
  const auto e = dictionary({{1, 0}, {0.9, 0.1}, {0, 1}});
  const IndexSnapshot first = std::make_shared<const NeighborIndex>(build_index(e, 1, 0));
  for (std::size_t b = 0; b < 50; ++b) CHECK(refresh_if_due(first, e, b, 50) == first);
  const auto rebuilt = refresh_if_due(first, e, 50, 50);
  CHECK(rebuilt != first);
  CHECK(rebuilt->built_at_batch() == 50);
  CHECK(rebuilt->entry(1).neighbors == first->entry(1).neighbors);
  CHECK(rebuilt->entry(3).directions == first->entry(3).directions);
  CHECK(rebuilt->fingerprint() == first->fingerprint());

  IndexSnapshot cur = first;
  for (std::size_t b = 1; b <= 5; ++b) {
    const auto next = refresh_if_due(cur, e, b, 1);
    CHECK(next != cur);
    cur = next;
  }
}

TEST_CASE("best direction") {
  const auto e = dictionary({{0, 0.5}, {1, 0.5}, {0, 1.5}});
  auto idx = build_index(e, 2);
  // neighbours of word 1 sit at +x and +y from it
  const auto& en = idx.entry(1);
  REQUIRE(en.neighbors.size() == 2);
  const std::size_t slot_y = en.neighbors[0] == 3 ? 0 : 1;
  const std::vector<double> v = {3, 4};
  const auto c = best_direction(idx, 1, v);
  REQUIRE(c);
  CHECK(c->slot == slot_y);
  CHECK(c->dot == doctest::Approx(4.0));

  const auto u = en.directions.row(1 - slot_y);
  const auto same = best_direction(idx, 1, u);
  CHECK(same->slot == 1 - slot_y);
  CHECK(same->dot == doctest::Approx(1.0));

  const std::vector<double> zero = {0, 0};
  CHECK_FALSE(best_direction(idx, 1, zero));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> q = {n(rng), n(rng)};
    const auto a = best_direction(idx, 2, q);
    const double scale = 1e-3 + 50.0 * std::abs(n(rng));
    for (double& x : q) x *= scale;
    CHECK(best_direction(idx, 2, q)->slot == a->slot);
  }
}

TEST_CASE("fingerprint tracks content") {
  auto e = dictionary({{1, 0}, {0, 1}});
  const auto before = embedding_fingerprint(e);
  e(0, 0) = 1.0000001;
  CHECK(embedding_fingerprint(e) != before);
}
