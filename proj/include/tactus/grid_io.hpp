#pragma once

// Self-describing binary grid container and CSV export.
//
// Layout (little endian):
//   bytes 0..7   magic "TACTGRID"
//   u32          version (1)
//   u32          element type: 1 = float32, 2 = float64
//   u32          channel count
//   u32          width
//   u32          height
//   data         channel-major, each channel row-major width*height

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tactus/core.hpp"

namespace tactus {

namespace detail {

constexpr char kGridMagic[8] = {'T', 'A', 'C', 'T', 'G', 'R', 'I', 'D'};

template <typename T>
constexpr std::uint32_t grid_elem_type() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? 1u : 2u;
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace detail

template <typename T>
void write_grid_file(const std::string& path,
                     const std::vector<const Grid<T>*>& channels) {
  if (channels.empty())
    throw std::invalid_argument("write_grid_file: no channels");
  const int w = channels[0]->width();
  const int h = channels[0]->height();
  for (const auto* g : channels)
    if (g->width() != w || g->height() != h)
      throw std::invalid_argument("write_grid_file: channel size mismatch");

  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open for writing: " + path);
  os.write(detail::kGridMagic, sizeof(detail::kGridMagic));
  detail::write_u32(os, 1);
  detail::write_u32(os, detail::grid_elem_type<T>());
  detail::write_u32(os, static_cast<std::uint32_t>(channels.size()));
  detail::write_u32(os, static_cast<std::uint32_t>(w));
  detail::write_u32(os, static_cast<std::uint32_t>(h));
  for (const auto* g : channels)
    os.write(reinterpret_cast<const char*>(g->data().data()),
             static_cast<std::streamsize>(g->data().size() * sizeof(T)));
  if (!os) throw InputError("write failed: " + path);
}

template <typename T>
std::vector<Grid<T>> read_grid_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, detail::kGridMagic, 8) != 0)
    throw InputError("not a grid file: " + path);
  const std::uint32_t version = detail::read_u32(is);
  if (version != 1)
    throw InputError("unsupported grid file version in " + path);
  const std::uint32_t elem = detail::read_u32(is);
  if (elem != detail::grid_elem_type<T>())
    throw InputError("grid element type mismatch in " + path);
  const std::uint32_t channels = detail::read_u32(is);
  const std::uint32_t w = detail::read_u32(is);
  const std::uint32_t h = detail::read_u32(is);
  if (!is || channels == 0 || w == 0 || h == 0)
    throw InputError("corrupt grid header in " + path);

  std::vector<Grid<T>> out;
  out.reserve(channels);
  for (std::uint32_t c = 0; c < channels; ++c) {
    Grid<T> g(static_cast<int>(w), static_cast<int>(h));
    is.read(reinterpret_cast<char*>(g.data().data()),
            static_cast<std::streamsize>(g.data().size() * sizeof(T)));
    if (!is) throw InputError("truncated grid file: " + path);
    out.push_back(std::move(g));
  }
  return out;
}

inline void save_depth(const std::string& path, const DepthMap& depth) {
  write_grid_file<double>(path, {&depth.z});
}

inline DepthMap load_depth(const std::string& path) {
  auto grids = read_grid_file<double>(path);
  if (grids.size() != 1)
    throw InputError("expected 1-channel depth grid: " + path);
  DepthMap d;
  d.z = std::move(grids[0]);
  return d;
}

inline void save_gradients(const std::string& path,
                           const GradientField& grad) {
  write_grid_file<double>(path, {&grad.p, &grad.q});
}

inline GradientField load_gradients(const std::string& path) {
  auto grids = read_grid_file<double>(path);
  if (grids.size() != 2)
    throw InputError("expected 2-channel gradient grid: " + path);
  GradientField g;
  g.p = std::move(grids[0]);
  g.q = std::move(grids[1]);
  return g;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

/// One CSV row per pixel: x,y,value. Header included.
template <typename T>
void write_grid_csv(const std::string& path, const Grid<T>& g,
                    const std::string& value_name = "value") {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open for writing: " + path);
  os << "x,y," << value_name << "\n";
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      os << x << ',' << y << ',' << detail::format_double(double(g(x, y)))
         << "\n";
}

}  // namespace tactus
