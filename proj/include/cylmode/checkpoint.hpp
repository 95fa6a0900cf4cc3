#pragma once

// Binary checkpoint: "CYLMODE1", n_r n_z K N (u32 LE), L_z t nu delta eta
// (f64 LE), then every velocity field of modes k = 0..K in storage order,
// each row-major f64 LE.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "cylmode/errors.hpp"
#include "cylmode/state.hpp"

namespace cylmode {

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'C', 'Y', 'L', 'M', 'O', 'D', 'E', '1'};

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& os, T v) {
  v = to_le(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint: unexpected end of file");
  return to_le(v);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModeState& s) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  const CylGrid& g = *s.grid;
  os.write(detail::kCheckpointMagic, 8);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(g.n_r()));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(g.n_z()));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.K()));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.params.N));
  for (double v : {g.L_z(), s.t, s.params.nu, s.params.delta, s.params.eta})
    detail::put<double>(os, v);
  for (const auto& m : s.modes)
    for (const auto& f : m.comps()) {
      const Array2D& a = f.values();
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) detail::put<double>(os, a(i, j));
    }
  if (!os) throw IoError("checkpoint: write to '" + path + "' failed");
}

// Parameters absent from the header (m, sigma, small_eps) and the radial
// scheme are taken from the caller.
inline ModeState load_checkpoint(const std::string& path, Params base = {},
                                 RadialScheme scheme =
                                     RadialScheme::chebyshev_gauss_lobatto_mapped) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw IoError("checkpoint: bad magic in '" + path + "'");
  const auto n_r = detail::get<std::uint32_t>(is);
  const auto n_z = detail::get<std::uint32_t>(is);
  const auto K = detail::get<std::uint32_t>(is);
  const auto N = detail::get<std::uint32_t>(is);
  const double L_z = detail::get<double>(is);
  const double t = detail::get<double>(is);
  base.nu = detail::get<double>(is);
  base.delta = detail::get<double>(is);
  base.eta = detail::get<double>(is);
  base.K = static_cast<int>(K);
  base.N = static_cast<int>(N);
  if (n_r > 100000 || n_z > 100000 || K > 10000) throw IoError("checkpoint: implausible header");
  GridPtr grid = CylGrid::build(static_cast<int>(n_r), static_cast<int>(n_z), L_z, scheme);
  ModeState s = ModeState::zero(grid, base);
  s.t = t;
  for (auto& m : s.modes)
    for (auto& f : m.comps()) {
      Array2D& a = f.values();
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = detail::get<double>(is);
    }
  is.peek();
  if (!is.eof()) throw IoError("checkpoint: trailing bytes in '" + path + "'");
  return s;
}

}  // namespace cylmode
