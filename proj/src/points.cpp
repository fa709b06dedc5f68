#include "kifmm/points.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "kifmm/error.hpp"

namespace kifmm {

std::vector<Point3> generate_points(Distribution kind, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<Point3> p(n);
  if (kind == Distribution::UniformCube) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& x : p) x = {u(gen), u(gen), u(gen)};
    return p;
  }
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& x : p) {
    double r = 0;
    do {
      x = {g(gen), g(gen), g(gen)};
      r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    } while (r < 1e-8);
    for (auto& c : x) c /= r;
  }
  return p;
}

std::vector<double> random_charges(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> q(n);
  for (auto& x : q) x = u(gen);
  return q;
}

namespace {

constexpr char kMagic[4] = {'K', 'I', 'F', 'M'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeader = 16;

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

template <class U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

void put_value(std::string& out, double v, int precision) {
  if (precision == 8) {
    put_le(out, std::bit_cast<std::uint64_t>(v));
  } else {
    put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

double get_value(const unsigned char* p, int precision) {
  if (precision == 8) return std::bit_cast<double>(get_le<std::uint64_t>(p));
  return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::Io, "read error on " + path);
  return data;
}

void dump(const std::string& path, const std::string& data, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) fail(ErrorKind::Io, "write error on " + path);
}

PointCloud parse_binary(const std::string& data, const std::string& path) {
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  if (data.size() < kHeader) fail(ErrorKind::Io, path + ": truncated header");
  if (p[4] != kVersion) fail(ErrorKind::Io, path + ": unsupported version " + std::to_string(p[4]));
  PointCloud c;
  c.precision = p[5];
  if (c.precision != 4 && c.precision != 8) fail(ErrorKind::Io, path + ": bad precision byte");
  if (p[6] > 1) fail(ErrorKind::Io, path + ": bad charge flag");
  const bool has_q = p[6] == 1;
  const auto count = get_le<std::uint64_t>(p + 8);
  const std::size_t fields = has_q ? 4 : 3;
  const std::size_t record = fields * static_cast<std::size_t>(c.precision);
  if (count > (data.size() - kHeader) / record || kHeader + count * record != data.size()) {
    fail(ErrorKind::Io, path + ": body length does not match count");
  }
  c.points.resize(count);
  if (has_q) c.charges.resize(count);
  const unsigned char* body = p + kHeader;
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* r = body + i * record;
    for (int a = 0; a < 3; ++a) {
      const double v = get_value(r + a * c.precision, c.precision);
      if (!std::isfinite(v)) fail(ErrorKind::Io, path + ": non-finite coordinate");
      c.points[i][static_cast<std::size_t>(a)] = v;
    }
    if (has_q) c.charges[i] = get_value(r + 3 * c.precision, c.precision);
  }
  return c;
}

bool parse_double(std::string_view s, double& v) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

PointCloud parse_csv(const std::string& data, const std::string& path) {
  PointCloud c;
  std::istringstream in(data);
  std::string line;
  std::size_t line_no = 0;
  int width = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> vals;
    bool ok = true;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      double v = 0;
      ok = ok && parse_double(std::string_view(line).substr(start, comma - start), v);
      vals.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!ok) {
      if (line_no == 1) continue;  // header
      fail(ErrorKind::Io, path + ":" + std::to_string(line_no) + ": malformed CSV row");
    }
    const int w = static_cast<int>(vals.size());
    if ((w != 3 && w != 4) || (width >= 0 && w != width)) {
      fail(ErrorKind::Io, path + ":" + std::to_string(line_no) + ": expected 3 or 4 consistent columns");
    }
    width = w;
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(vals[static_cast<std::size_t>(a)])) fail(ErrorKind::Io, path + ": non-finite coordinate");
    }
    c.points.push_back({vals[0], vals[1], vals[2]});
    if (w == 4) c.charges.push_back(vals[3]);
  }
  return c;
}

}  // namespace

void write_point_file(const std::string& path, const PointCloud& cloud) {
  if (cloud.precision != 4 && cloud.precision != 8) fail(ErrorKind::Parameter, "precision must be 4 or 8 bytes");
  const bool has_q = !cloud.charges.empty();
  if (has_q && cloud.charges.size() != cloud.points.size()) {
    fail(ErrorKind::Shape, "charge count does not match point count");
  }
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(cloud.precision));
  out.push_back(static_cast<char>(has_q ? 1 : 0));
  out.push_back('\0');
  put_le(out, static_cast<std::uint64_t>(cloud.points.size()));
  out.reserve(kHeader + cloud.points.size() * (has_q ? 4u : 3u) * static_cast<std::size_t>(cloud.precision));
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    for (double v : cloud.points[i]) put_value(out, v, cloud.precision);
    if (has_q) put_value(out, cloud.charges[i], cloud.precision);
  }
  dump(path, out, std::ios::binary | std::ios::trunc);
}

PointCloud read_point_file(const std::string& path) {
  const std::string data = slurp(path);
  if (data.size() >= 4 && std::memcmp(data.data(), kMagic, 4) == 0) return parse_binary(data, path);
  return parse_csv(data, path);
}

void write_point_csv(const std::string& path, const PointCloud& cloud) {
  const bool has_q = !cloud.charges.empty();
  std::string out;
  char buf[64];
  const auto put = [&](double v, char sep) {
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, r.ptr);
    out.push_back(sep);
  };
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    put(cloud.points[i][0], ',');
    put(cloud.points[i][1], ',');
    put(cloud.points[i][2], has_q ? ',' : '\n');
    if (has_q) put(cloud.charges[i], '\n');
  }
  dump(path, out, std::ios::trunc);
}

}  // namespace kifmm
