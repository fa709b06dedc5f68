#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kifmm/morton.hpp"

namespace kifmm {

enum class Distribution { UniformCube, SphereSurface };

/// Uniform in [0, 1)^3, or uniform on the unit sphere about the origin. Deterministic per seed.
std::vector<Point3> generate_points(Distribution kind, std::size_t n, std::uint64_t seed);

/// Uniform in [0, 1).
std::vector<double> random_charges(std::size_t n, std::uint64_t seed);

struct PointCloud {
  std::vector<Point3> points;
  std::vector<double> charges;  // empty when the file has none
  int precision = 8;            // bytes per stored value
};

/// Binary layout, little-endian: "KIFM", version 1, precision byte (4 or 8),
/// has_charges byte, reserved byte, uint64 count, then count records of
/// x, y, z[, q]. Throws Io on write failure, Parameter on bad precision.
void write_point_file(const std::string& path, const PointCloud& cloud);

/// Reads the binary format, or CSV rows "x,y,z[,q]" (optional header line) when
/// the magic is absent. Throws Io for unreadable or malformed files.
PointCloud read_point_file(const std::string& path);

void write_point_csv(const std::string& path, const PointCloud& cloud);

}  // namespace kifmm
