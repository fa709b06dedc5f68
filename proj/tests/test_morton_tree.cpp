#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "kifmm/error.hpp"
#include "kifmm/morton.hpp"
#include "kifmm/octree.hpp"
#include "oracle.hpp"

using namespace kifmm;

namespace {

const Domain kUnit{{0, 0, 0}, 1.0};


MortonKey key(int x, int y, int z, int level) { return MortonKey({std::uint32_t(x), std::uint32_t(y), std::uint32_t(z)}, level); }

template <class F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "no error raised";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(EncodePoint, Examples) {
  EXPECT_EQ(encode_point({0, 0, 0}, 3, kUnit), key(0, 0, 0, 3));
  EXPECT_EQ(encode_point({0.6, 0.6, 0.6}, 1, kUnit), key(1, 1, 1, 1));
  EXPECT_EQ(encode_point({0.26, 0.1, 0.9}, 2, kUnit), key(1, 0, 3, 2));
}

TEST(EncodePoint, UpperFaceClampsAndOutsideFails) {
  EXPECT_EQ(encode_point({1, 1, 1}, 4, kUnit), key(15, 15, 15, 4));
  expect_error(ErrorKind::Domain, [] { encode_point({1.01, 0.5, 0.5}, 3, kUnit); });
  expect_error(ErrorKind::Domain, [] { encode_point({-0.01, 0.5, 0.5}, 3, kUnit); });
}

TEST(EncodePoint, ContainsPointProperty) {
  const auto pts = oracle::uniform(2000, 1);
  for (int depth : {1, 3, 7, 16}) {
    for (const auto& p : pts) {
      const MortonKey k = encode_point(p, depth, kUnit);
      const Anchor a = k.anchor();
      const double w = std::ldexp(1.0, -depth);
      for (int d = 0; d < 3; ++d) {
        EXPECT_LE(a[d] * w, p[d]);
        EXPECT_LT(p[d], (a[d] + 1) * w);
      }
    }
  }
}

TEST(MortonKey, ParentExamples) {
  EXPECT_EQ(key(1, 1, 1, 1).parent(), key(0, 0, 0, 0));
  EXPECT_EQ(key(0, 0, 0, 5).parent(), key(0, 0, 0, 4));
  EXPECT_EQ(key(5, 2, 7, 3).parent(), key(2, 1, 3, 2));
  expect_error(ErrorKind::InvalidLevel, [] { MortonKey::root().parent(); });
}

TEST(MortonKey, ChildrenInvariants) {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int level = int(g() % 16);
    const std::uint32_t n = 1u << level;
    const MortonKey k({std::uint32_t(g() % n), std::uint32_t(g() % n), std::uint32_t(g() % n)}, level);
    const auto a = k.anchor();
    EXPECT_EQ(MortonKey(a, level), k);
    for (int d = 0; d < 3; ++d) EXPECT_LT(a[d], n);
    const auto ch = k.children();
    EXPECT_TRUE(std::is_sorted(ch.begin(), ch.end()));
    for (int i = 0; i < 8; ++i) {
      EXPECT_EQ(ch[i].parent(), k);
      EXPECT_EQ(ch[i].child_index(), i);
      EXPECT_EQ(ch[i].siblings(), ch);
    }
  }
  expect_error(ErrorKind::InvalidLevel, [] { key(0, 0, 0, 16).children(); });
}

TEST(MortonKey, SortedLevelChildrenStaySorted) {
  auto level = oracle::level_anchors(3);
  std::vector<MortonKey> keys;
  for (const auto& a : level) keys.push_back(key(a[0], a[1], a[2], 3));
  std::sort(keys.begin(), keys.end());
  std::vector<MortonKey> kids;
  for (const auto& k : keys)
    for (const auto& c : k.children()) kids.push_back(c);
  EXPECT_TRUE(std::is_sorted(kids.begin(), kids.end()));
}

TEST(Neighbors, Counts) {
  EXPECT_EQ(neighbors(key(1, 2, 1, 2)).size(), 26u);
  EXPECT_EQ(neighbors(key(5, 5, 5, 4)).size(), 26u);
  EXPECT_EQ(neighbors(key(0, 0, 0, 3)).size(), 7u);
  EXPECT_EQ(neighbors(key(1, 0, 1, 1)).size(), 7u);
}

TEST(Neighbors, MatchesBruteForce) {
  for (int level : {1, 2, 3}) {
    const auto all = oracle::level_anchors(level);
    for (const auto& t : all) {
      std::set<MortonKey> expect;
      for (const auto& s : all)
        if (oracle::cheb(s, t) == 1) expect.insert(key(s[0], s[1], s[2], level));
      const auto got = neighbors(key(t[0], t[1], t[2], level));
      EXPECT_EQ(std::set<MortonKey>(got.begin(), got.end()), expect);
    }
  }
}

TEST(InteractionList, InteriorIs189AndLevelOneEmpty) {
  EXPECT_EQ(interaction_list(key(3, 4, 3, 3)).size(), 189u);
  for (const auto& a : oracle::level_anchors(1)) EXPECT_TRUE(interaction_list(key(a[0], a[1], a[2], 1)).empty());
}

TEST(InteractionList, MatchesBruteForceAtLevelsTwoAndThree) {
  std::size_t max_size = 0;
  for (int level : {2, 3}) {
    const auto all = oracle::level_anchors(level);
    for (const auto& t : all) {
      const MortonKey tk = key(t[0], t[1], t[2], level);
      std::set<MortonKey> expect;
      for (const auto& s : all)
        if (oracle::admissible(s, t)) expect.insert(key(s[0], s[1], s[2], level));
      const auto got = interaction_list(tk);
      EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
      EXPECT_EQ(std::set<MortonKey>(got.begin(), got.end()), expect);
      EXPECT_LE(got.size(), 189u);
      max_size = std::max(max_size, got.size());
      for (const auto& s : got) {
        EXPECT_TRUE(are_adjacent(s.parent(), tk.parent()));
        EXPECT_FALSE(are_adjacent(s, tk));
        EXPECT_TRUE(is_admissible(s, tk));
      }
    }
  }
  EXPECT_EQ(max_size, 189u);
}

TEST(TransferVector, Examples) {
  const MortonKey t = key(2, 2, 2, 3);
  TransferVector tv = transfer_vector(key(4, 2, 2, 3), t);
  EXPECT_EQ(tv.offset, (std::array<int, 3>{2, 0, 0}));
  // (0,0,0) -> (3,3,3) at level 3: parents (0,0,0) and (1,1,1) are adjacent.
  tv = transfer_vector(key(0, 0, 0, 3), key(3, 3, 3, 3));
  EXPECT_EQ(tv.offset, (std::array<int, 3>{-3, -3, -3}));
  expect_error(ErrorKind::Admissibility, [&] { transfer_vector(key(3, 2, 2, 3), t); });
  expect_error(ErrorKind::Admissibility, [&] { transfer_vector(t, t); });
}

TEST(TransferVector, AllVectors) {
  const auto& all = all_transfer_vectors();
  ASSERT_EQ(all.size(), std::size_t(oracle::kTransferVectors));
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
  EXPECT_TRUE(std::binary_search(all.begin(), all.end(), TransferVector{{2, 0, 0}}));
  EXPECT_FALSE(std::binary_search(all.begin(), all.end(), TransferVector{{1, 1, 1}}));
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(transfer_vector_index(all[i]), i);
    const auto& o = all[i].offset;
    EXPECT_GE(std::max({std::abs(o[0]), std::abs(o[1]), std::abs(o[2])}), 2);
  }
  expect_error(ErrorKind::Admissibility, [] { transfer_vector_index(TransferVector{{1, 0, 0}}); });
}

TEST(TransferVector, UnionOverLevelThreePairs) {
  std::set<TransferVector> seen;
  const auto all = oracle::level_anchors(3);
  for (const auto& t : all)
    for (const auto& s : all)
      if (oracle::admissible(s, t)) seen.insert(transfer_vector(key(s[0], s[1], s[2], 3), key(t[0], t[1], t[2], 3)));
  const auto& tv = all_transfer_vectors();
  EXPECT_EQ(std::vector<TransferVector>(seen.begin(), seen.end()), tv);
}

TEST(Halo, Counts) {
  int present = 0;
  for (const auto& h : halo_clusters(key(1, 2, 1, 2))) present += h.source_parent.has_value();
  EXPECT_EQ(present, oracle::kHalos);
  present = 0;
  for (const auto& h : halo_clusters(key(0, 0, 0, 2))) present += h.source_parent.has_value();
  EXPECT_EQ(present, 7);
  EXPECT_EQ(halo_offsets().size(), std::size_t(oracle::kHalos));
}

TEST(Halo, CoversInteractionListsAndCountsPairs) {
  for (const auto& pa : oracle::level_anchors(2)) {
    const MortonKey parent = key(pa[0], pa[1], pa[2], 2);
    const auto halos = halo_clusters(parent);
    std::set<MortonKey> sources;
    for (const auto& h : halos)
      if (h.source_parent)
        for (const auto& c : h.source_parent->children()) sources.insert(c);
    for (const auto& child : parent.children())
      for (const auto& s : interaction_list(child)) EXPECT_TRUE(sources.count(s));
  }
  // Interior cluster: 26 halos x 64 pairs, 189 admissible entries per target child.
  std::array<int, 8> per_child{};
  std::size_t pairs = 0;
  std::set<TransferVector> vectors;
  for (const auto& o : halo_offsets()) {
    for (int ct = 0; ct < 8; ++ct)
      for (int cs = 0; cs < 8; ++cs) {
        ++pairs;
        const auto t = cluster_pair_offset(o, cs, ct);
        if (std::max({std::abs(t[0]), std::abs(t[1]), std::abs(t[2])}) >= 2) {
          ++per_child[ct];
          vectors.insert(TransferVector{t});
        }
      }
  }
  EXPECT_EQ(pairs, std::size_t(oracle::kHalos * oracle::kClusterPairs));
  for (int c : per_child) EXPECT_EQ(c, oracle::kMaxInteractionList);
  EXPECT_EQ(vectors.size(), std::size_t(oracle::kTransferVectors));
}

TEST(Octree, SinglePointChain) {
  const std::vector<Point3> p{{0.3, 0.4, 0.5}};
  const Octree t(p, 4);
  for (int l = 0; l <= 4; ++l) EXPECT_EQ(t.n_keys(l), 1u);
  for (int l = 1; l <= 4; ++l) EXPECT_EQ(t.keys(l)[0].parent(), t.keys(l - 1)[0]);
}

TEST(Octree, OnePointPerOctant) {
  std::vector<Point3> p;
  for (int c = 0; c < 8; ++c) p.push_back({0.25 + 0.5 * ((c >> 2) & 1), 0.25 + 0.5 * ((c >> 1) & 1), 0.25 + 0.5 * (c & 1)});
  const Octree t(p, 1, kUnit);
  EXPECT_EQ(t.leaves().size(), 8u);
}

TEST(Octree, UniformPartition) {
  const auto raw = oracle::uniform(10000, 7);
  const std::vector<Point3> p(raw.begin(), raw.end());
  const Octree t(p, 3);
  EXPECT_EQ(t.leaves().size(), 512u);
  std::size_t total = 0;
  std::vector<int> seen(p.size(), 0);
  for (std::size_t l = 0; l < t.leaves().size(); ++l) {
    const auto [b, e] = t.leaf_points(l);
    total += e - b;
    for (std::size_t i = b; i < e; ++i) {
      const std::size_t orig = t.permutation()[i];
      ++seen[orig];
      EXPECT_EQ(t.x()[i], p[orig][0]);
      EXPECT_EQ(encode_point(p[orig], 3, t.domain()), t.leaves()[l]);
    }
  }
  EXPECT_EQ(total, p.size());
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  for (const auto& q : p) EXPECT_TRUE(t.domain().contains(q));
}

TEST(Octree, PrunedStructure) {
  // Two clusters in opposite corners leave most of the tree empty.
  std::vector<Point3> p;
  for (const auto& q : oracle::uniform(300, 2, 0.0, 0.1)) p.push_back(q);
  for (const auto& q : oracle::uniform(300, 3, 0.9, 1.0)) p.push_back(q);
  const Octree t(p, 5);
  std::set<std::uint64_t> all;
  for (int l = 0; l <= 5; ++l) {
    const auto keys = t.keys(l);
    EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
    for (std::size_t i = 0; i < keys.size(); ++i) {
      EXPECT_TRUE(all.insert(keys[i].raw()).second);
      EXPECT_EQ(t.find(keys[i]), i);
      if (l < 5) {
        const auto [b, e] = t.children_range(l, i);
        EXPECT_LT(b, e);
        for (std::size_t c = b; c < e; ++c) EXPECT_EQ(t.keys(l + 1)[c].parent(), keys[i]);
      }
    }
  }
  for (std::size_t l = 0; l < t.leaves().size(); ++l) {
    const auto [b, e] = t.leaf_points(l);
    EXPECT_LT(b, e);
  }
  EXPECT_LT(t.n_keys(5), 32768u);
}

TEST(Octree, DuplicatesShareALeaf) {
  const std::vector<Point3> p{{0.2, 0.2, 0.2}, {0.2, 0.2, 0.2}, {0.8, 0.8, 0.8}};
  const Octree t(p, 3);
  EXPECT_EQ(t.leaves().size(), 2u);
}

TEST(Octree, EmptyInputFails) {
  expect_error(ErrorKind::Input, [] { Octree(std::vector<Point3>{}, 3); });
}

TEST(Domain, BoundingMargin) {
  const std::vector<Point3> p{{0, 0, 0}, {2, 1, 1}};
  const Domain d = Domain::bounding(p);
  EXPECT_NEAR(d.side, 2.0 * (1 + 2e-5), 1e-12);
  EXPECT_NEAR(d.origin[0], -2e-5, 1e-15);
  for (const auto& q : p) EXPECT_TRUE(d.contains(q));
}
