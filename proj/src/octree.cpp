#include "kifmm/octree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kifmm/error.hpp"

namespace kifmm {

Octree::Octree(std::span<const Point3> points, int depth)
    : Octree(points, depth, points.empty() ? Domain{} : Domain::bounding(points)) {}

Octree::Octree(std::span<const Point3> points, int depth, const Domain& domain) : depth_(depth), domain_(domain) {
  if (points.empty()) fail(ErrorKind::Input, "cannot build a tree over zero points");
  if (depth < 1 || depth > MortonKey::kMaxLevel) fail(ErrorKind::InvalidLevel, "tree depth must be in [1, 16]");
  build(points);
}

void Octree::build(std::span<const Point3> points) {
  const std::size_t n = points.size();
  std::vector<MortonKey> point_keys(n);
  for (std::size_t i = 0; i < n; ++i) point_keys[i] = encode_point(points[i], depth_, domain_);

  permutation_.resize(n);
  std::iota(permutation_.begin(), permutation_.end(), std::size_t{0});
  std::stable_sort(permutation_.begin(), permutation_.end(),
                   [&](std::size_t a, std::size_t b) { return point_keys[a] < point_keys[b]; });

  x_.resize(n);
  y_.resize(n);
  z_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = points[permutation_[i]];
    x_[i] = p[0];
    y_[i] = p[1];
    z_[i] = p[2];
  }

  keys_.assign(static_cast<std::size_t>(depth_) + 1, {});
  auto& leaves = keys_[static_cast<std::size_t>(depth_)];
  leaf_offsets_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& k = point_keys[permutation_[i]];
    if (leaves.empty() || leaves.back() != k) {
      leaves.push_back(k);
      leaf_offsets_.push_back(i);
    }
  }
  leaf_offsets_.push_back(n);

  child_offsets_.assign(static_cast<std::size_t>(depth_), {});
  for (int l = depth_; l > 0; --l) {
    const auto& fine = keys_[static_cast<std::size_t>(l)];
    auto& coarse = keys_[static_cast<std::size_t>(l - 1)];
    auto& offsets = child_offsets_[static_cast<std::size_t>(l - 1)];
    for (std::size_t i = 0; i < fine.size(); ++i) {
      const auto p = fine[i].parent();
      if (coarse.empty() || coarse.back() != p) {
        coarse.push_back(p);
        offsets.push_back(i);
      }
    }
    offsets.push_back(fine.size());
  }

  level_offsets_.assign(static_cast<std::size_t>(depth_) + 2, 0);
  for (int l = 0; l <= depth_; ++l) {
    level_offsets_[static_cast<std::size_t>(l) + 1] = level_offsets_[static_cast<std::size_t>(l)] + n_keys(l);
  }
}

std::optional<std::size_t> Octree::find(const MortonKey& key) const {
  const int l = key.level();
  if (l > depth_) return std::nullopt;
  const auto& ks = keys_[static_cast<std::size_t>(l)];
  auto it = std::lower_bound(ks.begin(), ks.end(), key);
  if (it == ks.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - ks.begin());
}

std::pair<std::size_t, std::size_t> Octree::children_range(int level, std::size_t index) const {
  if (level < 0 || level >= depth_) fail(ErrorKind::InvalidLevel, "leaves have no children");
  const auto& offsets = child_offsets_[static_cast<std::size_t>(level)];
  return {offsets[index], offsets[index + 1]};
}

double Octree::box_side(int level) const { return std::ldexp(domain_.side, -level); }

Point3 Octree::box_center(const MortonKey& key) const {
  const double w = box_side(key.level());
  const auto a = key.anchor();
  return {domain_.origin[0] + (a[0] + 0.5) * w, domain_.origin[1] + (a[1] + 0.5) * w,
          domain_.origin[2] + (a[2] + 0.5) * w};
}

}  // namespace kifmm
