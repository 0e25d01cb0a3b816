#include "coref/render.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coref {

std::string to_pgm(const OccupancyGrid& g) {
  if (g.dim() != Dim::TwoD) throw std::invalid_argument("to_pgm: 2D grids only");
  std::ostringstream os;
  os << "P2\n" << g.res()[0] << ' ' << g.res()[1] << "\n255\n";
  for (int y = 0; y < g.res()[1]; ++y) {
    for (int x = 0; x < g.res()[0]; ++x)
      os << (g.get(g.index(x, y)) ? 255 : 0) << (x + 1 < g.res()[0] ? ' ' : '\n');
  }
  return os.str();
}

OccupancyGrid from_pgm(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  is >> magic >> w >> h >> maxv;
  if (magic != "P2" || w < 1 || h < 1) throw std::invalid_argument("bad PGM");
  OccupancyGrid g(Dim::TwoD, {w, h, 1});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int v;
      if (!(is >> v)) throw std::invalid_argument("PGM truncated");
      if (v * 2 > maxv) g.set(g.index(x, y), true);
    }
  return g;
}

std::string to_slice_strip_pgm(const OccupancyGrid& g) {
  if (g.dim() != Dim::ThreeD) throw std::invalid_argument("slice strip: 3D grids only");
  const auto& r = g.res();
  std::ostringstream os;
  os << "P2\n" << r[0] * r[2] << ' ' << r[1] << "\n255\n";
  for (int y = 0; y < r[1]; ++y) {
    for (int z = 0; z < r[2]; ++z)
      for (int x = 0; x < r[0]; ++x) {
        bool last = z == r[2] - 1 && x == r[0] - 1;
        os << (g.get(g.index(x, y, z)) ? 255 : 0) << (last ? '\n' : ' ');
      }
  }
  return os.str();
}

std::string to_voxel_text(const OccupancyGrid& g) {
  if (g.dim() != Dim::ThreeD) throw std::invalid_argument("voxel text: 3D grids only");
  std::ostringstream os;
  os << "VOX " << g.res()[0] << ' ' << g.res()[1] << ' ' << g.res()[2] << '\n';
  for (int64_t i = 0; i < g.cell_count(); ++i) {
    if (!g.get(i)) continue;
    auto c = g.coords(i);
    os << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  }
  return os.str();
}

OccupancyGrid from_voxel_text(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  std::array<int, 3> res{0, 0, 0};
  is >> magic >> res[0] >> res[1] >> res[2];
  if (magic != "VOX") throw std::invalid_argument("bad voxel text");
  OccupancyGrid g(Dim::ThreeD, res);
  int x, y, z;
  while (is >> x >> y >> z) g.set(g.index(x, y, z), true);
  return g;
}

void render_to_file(const OccupancyGrid& g, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  bool txt = path.size() > 4 && path.substr(path.size() - 4) == ".txt";
  if (g.dim() == Dim::TwoD)
    f << to_pgm(g);
  else if (txt)
    f << to_voxel_text(g);
  else
    f << to_slice_strip_pgm(g);
}

}  // namespace coref
