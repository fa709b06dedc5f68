#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace kifmm {

using Point3 = std::array<double, 3>;
using Anchor = std::array<std::uint32_t, 3>;

/// Cube enclosing all points of a problem. Box (anchor, level) covers
/// [origin + anchor * w, origin + (anchor + 1) * w) with w = side / 2^level.
struct Domain {
  Point3 origin{0.0, 0.0, 0.0};
  double side = 1.0;

  /// Tight bounding cube of the points, grown by a relative margin of 1e-5.
  static Domain bounding(std::span<const Point3> points);
  /// Smallest domain containing both point sets.
  static Domain bounding(std::span<const Point3> a, std::span<const Point3> b);

  bool contains(const Point3& p) const;
};

/// Box identifier: anchor bits interleaved (x most significant) at the
/// maximum depth, shifted left by five bits, with the level in the low bits.
/// Comparison on the raw word orders keys of one level in Morton order.
class MortonKey {
 public:
  static constexpr int kMaxLevel = 16;
  static constexpr int kLevelBits = 5;

  constexpr MortonKey() = default;
  MortonKey(const Anchor& anchor, int level);

  static constexpr MortonKey from_raw(std::uint64_t raw) { return MortonKey(raw); }
  static MortonKey root() { return MortonKey(); }

  constexpr std::uint64_t raw() const { return raw_; }
  constexpr int level() const { return static_cast<int>(raw_ & ((1u << kLevelBits) - 1)); }
  Anchor anchor() const;

  /// Throws InvalidLevel at the root.
  MortonKey parent() const;
  /// Children in sorted order; throws InvalidLevel at kMaxLevel.
  std::array<MortonKey, 8> children() const;
  /// The eight keys sharing this key's parent, including itself.
  std::array<MortonKey, 8> siblings() const;
  /// Position among siblings, (x << 2) | (y << 1) | z of the anchor's low bits.
  int child_index() const;

  /// Same-level key at anchor + offset, or nullopt if it leaves the domain.
  std::optional<MortonKey> shifted(const std::array<int, 3>& offset) const;

  constexpr auto operator<=>(const MortonKey&) const = default;

 private:
  constexpr explicit MortonKey(std::uint64_t raw) : raw_(raw) {}
  std::uint64_t raw_ = 0;
};

struct MortonKeyHash {
  std::size_t operator()(const MortonKey& k) const noexcept { return std::hash<std::uint64_t>{}(k.raw()); }
};

/// Integer offset source.anchor - target.anchor of an admissible pair.
struct TransferVector {
  std::array<int, 3> offset{0, 0, 0};
  constexpr auto operator<=>(const TransferVector&) const = default;
};

inline constexpr std::size_t kTransferVectorCount = 316;
inline constexpr std::size_t kHaloCount = 26;

/// Box containing p at the given depth; the domain's upper faces map to the last box.
MortonKey encode_point(const Point3& p, int depth, const Domain& domain);

/// Same-level keys whose anchors differ by {-1,0,1}^3 \ {0}, clipped to the domain.
std::vector<MortonKey> neighbors(const MortonKey& key);
bool are_adjacent(const MortonKey& a, const MortonKey& b);

/// Children of the parent's neighbours that are not adjacent to key. Sorted.
std::vector<MortonKey> interaction_list(const MortonKey& key);
bool is_admissible(const MortonKey& source, const MortonKey& target);

/// Throws Admissibility when source is not in interaction_list(target).
TransferVector transfer_vector(const MortonKey& source, const MortonKey& target);

/// The 316 vectors in [-3,3]^3 of Chebyshev norm >= 2, lexicographic in (x, y, z).
const std::vector<TransferVector>& all_transfer_vectors();
/// Position of t in all_transfer_vectors(); throws Admissibility if t is not one.
std::size_t transfer_vector_index(const TransferVector& t);

/// Offsets {-1,0,1}^3 \ {0} in lexicographic order: the 26 halo positions.
const std::array<std::array<int, 3>, kHaloCount>& halo_offsets();

struct HaloCluster {
  std::array<int, 3> offset;
  std::optional<MortonKey> source_parent;  // absent when outside the domain
};

/// The 26 neighbour parents supplying M2L sources for the children of target_parent.
std::array<HaloCluster, kHaloCount> halo_clusters(const MortonKey& target_parent);

/// Anchor offset of child index c within its parent, each component 0 or 1.
constexpr std::array<int, 3> child_offset(int c) { return {(c >> 2) & 1, (c >> 1) & 1, c & 1}; }

/// Transfer vector between source child cs of the halo cluster at offset o and
/// target child ct of the target cluster: 2 o + offset(cs) - offset(ct).
std::array<int, 3> cluster_pair_offset(const std::array<int, 3>& halo_offset, int source_child, int target_child);

}  // namespace kifmm
