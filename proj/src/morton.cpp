#include "kifmm/morton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kifmm/error.hpp"

namespace kifmm {

namespace {

constexpr std::uint64_t spread_bits(std::uint64_t v) {
  // 16 input bits -> every third bit of a 48-bit word.
  v &= 0xffffULL;
  v = (v | (v << 16)) & 0x0000ff0000ffULL;
  v = (v | (v << 8)) & 0x00f00f00f00fULL;
  v = (v | (v << 4)) & 0x0c30c30c30c3ULL;
  v = (v | (v << 2)) & 0x249249249249ULL;
  return v;
}

constexpr std::uint64_t compact_bits(std::uint64_t v) {
  v &= 0x249249249249ULL;
  v = (v | (v >> 2)) & 0x0c30c30c30c3ULL;
  v = (v | (v >> 4)) & 0x00f00f00f00fULL;
  v = (v | (v >> 8)) & 0x0000ff0000ffULL;
  v = (v | (v >> 16)) & 0xffffULL;
  return v;
}

constexpr std::uint64_t kLevelMask = (1u << MortonKey::kLevelBits) - 1;

int chebyshev(const std::array<int, 3>& o) { return std::max({std::abs(o[0]), std::abs(o[1]), std::abs(o[2])}); }

std::array<int, 3> anchor_delta(const MortonKey& a, const MortonKey& b) {
  const auto x = a.anchor();
  const auto y = b.anchor();
  return {static_cast<int>(x[0]) - static_cast<int>(y[0]), static_cast<int>(x[1]) - static_cast<int>(y[1]),
          static_cast<int>(x[2]) - static_cast<int>(y[2])};
}

}  // namespace

Domain Domain::bounding(std::span<const Point3> points) { return bounding(points, {}); }

Domain Domain::bounding(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() && b.empty()) fail(ErrorKind::Input, "cannot bound an empty point set");
  Point3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
  Point3 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::lowest()};
  auto grow = [&](std::span<const Point3> pts) {
    for (const auto& p : pts) {
      for (int d = 0; d < 3; ++d) {
        if (!std::isfinite(p[d])) fail(ErrorKind::Input, "non-finite point coordinate");
        lo[d] = std::min(lo[d], p[d]);
        hi[d] = std::max(hi[d], p[d]);
      }
    }
  };
  grow(a);
  grow(b);
  double side = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  Domain dom;
  if (side == 0.0) {
    dom.side = 1.0;
    for (int d = 0; d < 3; ++d) dom.origin[d] = lo[d] - 0.5;
    return dom;
  }
  const double margin = 1e-5 * side;
  for (int d = 0; d < 3; ++d) dom.origin[d] = lo[d] - margin;
  dom.side = side + 2.0 * margin;
  return dom;
}

bool Domain::contains(const Point3& p) const {
  for (int d = 0; d < 3; ++d) {
    if (!(p[d] >= origin[d] && p[d] <= origin[d] + side)) return false;
  }
  return true;
}

MortonKey::MortonKey(const Anchor& anchor, int level) {
  if (level < 0 || level > kMaxLevel) fail(ErrorKind::InvalidLevel, "level out of range: " + std::to_string(level));
  const std::uint64_t extent = 1ULL << level;
  for (auto a : anchor) {
    if (a >= extent) fail(ErrorKind::Domain, "anchor component outside level extent");
  }
  const int shift = kMaxLevel - level;
  const std::uint64_t code = (spread_bits(std::uint64_t{anchor[0]} << shift) << 2) |
                             (spread_bits(std::uint64_t{anchor[1]} << shift) << 1) |
                             spread_bits(std::uint64_t{anchor[2]} << shift);
  raw_ = (code << kLevelBits) | static_cast<std::uint64_t>(level);
}

Anchor MortonKey::anchor() const {
  const std::uint64_t code = raw_ >> kLevelBits;
  const int shift = kMaxLevel - level();
  return {static_cast<std::uint32_t>(compact_bits(code >> 2) >> shift),
          static_cast<std::uint32_t>(compact_bits(code >> 1) >> shift),
          static_cast<std::uint32_t>(compact_bits(code) >> shift)};
}

MortonKey MortonKey::parent() const {
  const int l = level();
  if (l == 0) fail(ErrorKind::InvalidLevel, "the root key has no parent");
  // Clear the three code bits that distinguish this key among its siblings.
  const int bit = 3 * (kMaxLevel - l);
  std::uint64_t code = raw_ >> kLevelBits;
  code &= ~(std::uint64_t{7} << bit);
  return MortonKey((code << kLevelBits) | static_cast<std::uint64_t>(l - 1));
}

std::array<MortonKey, 8> MortonKey::children() const {
  const int l = level();
  if (l >= kMaxLevel) fail(ErrorKind::InvalidLevel, "key at maximum depth has no children");
  const int bit = 3 * (kMaxLevel - l - 1);
  const std::uint64_t code = raw_ >> kLevelBits;
  std::array<MortonKey, 8> out;
  for (std::uint64_t c = 0; c < 8; ++c) {
    out[c] = MortonKey((((code | (c << bit))) << kLevelBits) | static_cast<std::uint64_t>(l + 1));
  }
  return out;
}

std::array<MortonKey, 8> MortonKey::siblings() const { return parent().children(); }

int MortonKey::child_index() const {
  const int l = level();
  if (l == 0) return 0;
  const int bit = 3 * (kMaxLevel - l);
  return static_cast<int>(((raw_ >> kLevelBits) >> bit) & 7);
}

std::optional<MortonKey> MortonKey::shifted(const std::array<int, 3>& offset) const {
  const auto a = anchor();
  const std::int64_t extent = std::int64_t{1} << level();
  Anchor b{};
  for (int d = 0; d < 3; ++d) {
    const std::int64_t v = static_cast<std::int64_t>(a[d]) + offset[d];
    if (v < 0 || v >= extent) return std::nullopt;
    b[d] = static_cast<std::uint32_t>(v);
  }
  return MortonKey(b, level());
}

MortonKey encode_point(const Point3& p, int depth, const Domain& domain) {
  if (depth < 0 || depth > MortonKey::kMaxLevel) fail(ErrorKind::InvalidLevel, "depth out of range");
  if (!domain.contains(p)) fail(ErrorKind::Domain, "point outside domain");
  const double extent = std::ldexp(1.0, depth);
  const auto last = static_cast<std::uint32_t>((1ULL << depth) - 1);
  Anchor a{};
  for (int d = 0; d < 3; ++d) {
    const double u = (p[d] - domain.origin[d]) / domain.side;
    const double f = std::floor(u * extent);
    a[d] = f >= extent ? last : static_cast<std::uint32_t>(std::max(0.0, f));
  }
  return MortonKey(a, depth);
}

std::vector<MortonKey> neighbors(const MortonKey& key) {
  std::vector<MortonKey> out;
  if (key.level() == 0) return out;
  out.reserve(26);
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      for (int k = -1; k <= 1; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        if (auto n = key.shifted({i, j, k})) out.push_back(*n);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool are_adjacent(const MortonKey& a, const MortonKey& b) {
  return a.level() == b.level() && a != b && chebyshev(anchor_delta(a, b)) <= 1;
}

bool is_admissible(const MortonKey& source, const MortonKey& target) {
  if (source.level() != target.level() || source.level() < 2) return false;
  if (chebyshev(anchor_delta(source, target)) < 2) return false;
  return chebyshev(anchor_delta(source.parent(), target.parent())) <= 1;
}

std::vector<MortonKey> interaction_list(const MortonKey& key) {
  std::vector<MortonKey> out;
  if (key.level() < 2) return out;
  out.reserve(189);
  for (const auto& pn : neighbors(key.parent())) {
    for (const auto& c : pn.children()) {
      if (chebyshev(anchor_delta(c, key)) >= 2) out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

TransferVector transfer_vector(const MortonKey& source, const MortonKey& target) {
  if (!is_admissible(source, target)) fail(ErrorKind::Admissibility, "box pair is not admissible");
  return TransferVector{anchor_delta(source, target)};
}

const std::vector<TransferVector>& all_transfer_vectors() {
  static const std::vector<TransferVector> vectors = [] {
    std::vector<TransferVector> v;
    v.reserve(kTransferVectorCount);
    for (int i = -3; i <= 3; ++i) {
      for (int j = -3; j <= 3; ++j) {
        for (int k = -3; k <= 3; ++k) {
          if (chebyshev({i, j, k}) >= 2) v.push_back(TransferVector{{i, j, k}});
        }
      }
    }
    return v;
  }();
  return vectors;
}

std::size_t transfer_vector_index(const TransferVector& t) {
  static const std::array<int, 343> table = [] {
    std::array<int, 343> tab{};
    tab.fill(-1);
    const auto& all = all_transfer_vectors();
    for (std::size_t n = 0; n < all.size(); ++n) {
      const auto& o = all[n].offset;
      tab[static_cast<std::size_t>((o[0] + 3) * 49 + (o[1] + 3) * 7 + (o[2] + 3))] = static_cast<int>(n);
    }
    return tab;
  }();
  const auto& o = t.offset;
  for (int d = 0; d < 3; ++d) {
    if (o[d] < -3 || o[d] > 3) fail(ErrorKind::Admissibility, "transfer vector component outside [-3, 3]");
  }
  const int idx = table[static_cast<std::size_t>((o[0] + 3) * 49 + (o[1] + 3) * 7 + (o[2] + 3))];
  if (idx < 0) fail(ErrorKind::Admissibility, "offset is near-field");
  return static_cast<std::size_t>(idx);
}

const std::array<std::array<int, 3>, kHaloCount>& halo_offsets() {
  static const std::array<std::array<int, 3>, kHaloCount> offsets = [] {
    std::array<std::array<int, 3>, kHaloCount> o{};
    std::size_t n = 0;
    for (int i = -1; i <= 1; ++i)
      for (int j = -1; j <= 1; ++j)
        for (int k = -1; k <= 1; ++k)
          if (i != 0 || j != 0 || k != 0) o[n++] = {i, j, k};
    return o;
  }();
  return offsets;
}

std::array<HaloCluster, kHaloCount> halo_clusters(const MortonKey& target_parent) {
  std::array<HaloCluster, kHaloCount> out;
  const auto& offs = halo_offsets();
  for (std::size_t h = 0; h < kHaloCount; ++h) {
    out[h].offset = offs[h];
    out[h].source_parent = target_parent.level() == 0 ? std::nullopt : target_parent.shifted(offs[h]);
  }
  return out;
}

std::array<int, 3> cluster_pair_offset(const std::array<int, 3>& halo_offset, int source_child, int target_child) {
  const auto s = child_offset(source_child);
  const auto t = child_offset(target_child);
  return {2 * halo_offset[0] + s[0] - t[0], 2 * halo_offset[1] + s[1] - t[1], 2 * halo_offset[2] + s[2] - t[2]};
}

}  // namespace kifmm
