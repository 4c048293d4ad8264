#pragma once

// Flat binary and CSV serialization of grid fields and particle clouds.
//
// Binary layout (little-endian):
//   u32 dim | u32 n | f64 box | f64 origin[dim] | payload
// Field payload: n*n f64 samples, row-major with x1 slow.
// Particle payload: n points, each dim f64 coordinates.

#include <bit>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "loglab/core/grid_field.hpp"

namespace loglab {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw PreconditionError("binary read: truncated input");
  return v;
}

struct BinaryHeader {
  std::uint32_t dim;
  std::uint32_t n;
  double box;
  Vec2 origin;
};

inline void put_header(std::ostream& os, const BinaryHeader& h) {
  put<std::uint32_t>(os, h.dim);
  put<std::uint32_t>(os, h.n);
  put<double>(os, h.box);
  put<double>(os, h.origin.x);
  put<double>(os, h.origin.y);
}

inline BinaryHeader get_header(std::istream& is) {
  BinaryHeader h{};
  h.dim = get<std::uint32_t>(is);
  h.n = get<std::uint32_t>(is);
  h.box = get<double>(is);
  if (h.dim != 2) throw PreconditionError("binary read: only dim = 2 is supported");
  h.origin.x = get<double>(is);
  h.origin.y = get<double>(is);
  return h;
}

}  // namespace detail

inline void write_binary(std::ostream& os, const GridField& f) {
  detail::put_header(os, {2, static_cast<std::uint32_t>(f.n()), f.box(), f.origin()});
  os.write(reinterpret_cast<const char*>(f.values().data()),
           static_cast<std::streamsize>(f.values().size() * sizeof(double)));
}

inline GridField read_binary_field(std::istream& is) {
  const auto h = detail::get_header(is);
  std::vector<double> v(static_cast<std::size_t>(h.n) * h.n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw PreconditionError("binary read: truncated field payload");
  return GridField(h.n, h.box, std::move(v), h.origin);
}

inline void write_csv(std::ostream& os, const GridField& f) {
  os << "i,j,x1,x2,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < f.n(); ++i)
    for (std::size_t j = 0; j < f.n(); ++j) {
      const Vec2 x = f.node(i, j);
      os << i << ',' << j << ',' << x.x << ',' << x.y << ',' << f(i, j) << '\n';
    }
}

/// Particle positions inside a periodic box of side `box` anchored at `origin`.
struct ParticleDump {
  double box = 1.0;
  Vec2 origin{};
  std::vector<Vec2> points;
};

inline void write_binary(std::ostream& os, const ParticleDump& d) {
  detail::put_header(os, {2, static_cast<std::uint32_t>(d.points.size()), d.box, d.origin});
  for (Vec2 p : d.points) {
    detail::put<double>(os, p.x);
    detail::put<double>(os, p.y);
  }
}

inline ParticleDump read_binary_particles(std::istream& is) {
  const auto h = detail::get_header(is);
  ParticleDump d{h.box, h.origin, std::vector<Vec2>(h.n)};
  for (auto& p : d.points) {
    p.x = detail::get<double>(is);
    p.y = detail::get<double>(is);
  }
  return d;
}

template <class T>
void save_binary(const std::string& path, const T& obj) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PreconditionError("cannot open " + path + " for writing");
  write_binary(os, obj);
}

}  // namespace loglab
