#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "kifmm/morton.hpp"

namespace kifmm {

/// Uniformly refined octree with empty branches pruned. Points are stored
/// contiguously per leaf in Morton order; every retained key at level < depth
/// has at least one non-empty descendant leaf. Immutable after construction.
class Octree {
 public:
  /// Builds with the bounding domain of the points.
  Octree(std::span<const Point3> points, int depth);
  Octree(std::span<const Point3> points, int depth, const Domain& domain);

  int depth() const { return depth_; }
  const Domain& domain() const { return domain_; }

  /// Retained keys of one level, sorted.
  std::span<const MortonKey> keys(int level) const { return keys_.at(static_cast<std::size_t>(level)); }
  std::span<const MortonKey> leaves() const { return keys(depth_); }
  std::size_t n_keys(int level) const { return keys_.at(static_cast<std::size_t>(level)).size(); }

  /// Index of key within its level, if retained.
  std::optional<std::size_t> find(const MortonKey& key) const;

  /// Number of retained keys on levels below `level`; locates a level's slice
  /// inside level-contiguous coefficient buffers.
  std::size_t level_offset(int level) const { return level_offsets_.at(static_cast<std::size_t>(level)); }
  std::size_t total_keys() const { return level_offsets_.back(); }

  /// Range [begin, end) of the children of keys(level)[index] inside keys(level + 1).
  std::pair<std::size_t, std::size_t> children_range(int level, std::size_t index) const;

  std::size_t n_points() const { return permutation_.size(); }
  /// Range [begin, end) of leaves()[leaf] inside the sorted point arrays.
  std::pair<std::size_t, std::size_t> leaf_points(std::size_t leaf) const {
    return {leaf_offsets_[leaf], leaf_offsets_[leaf + 1]};
  }
  std::span<const double> x() const { return x_; }
  std::span<const double> y() const { return y_; }
  std::span<const double> z() const { return z_; }
  /// Original input index of each sorted point.
  std::span<const std::size_t> permutation() const { return permutation_; }

  double box_side(int level) const;
  Point3 box_center(const MortonKey& key) const;

 private:
  void build(std::span<const Point3> points);

  int depth_;
  Domain domain_;
  std::vector<std::vector<MortonKey>> keys_;
  std::vector<std::vector<std::size_t>> child_offsets_;
  std::vector<std::size_t> level_offsets_;
  std::vector<std::size_t> leaf_offsets_;
  std::vector<std::size_t> permutation_;
  std::vector<double> x_, y_, z_;
};

}  // namespace kifmm
