#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coref/cli.hpp"
#include "coref/dataset.hpp"
#include "coref/executor.hpp"
#include "coref/proposal.hpp"
#include "coref/render.hpp"
#include "coref/rng.hpp"

using namespace coref;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("coref_test_" + std::to_string(Rng(size_t(this)).next()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& p) const { return (path / p).string(); }
};

}  // namespace

TEST_CASE("pgm round-trips 2D grids") {
  Rng rng(701);
  OccupancyGrid g(Dim::TwoD, {64, 64, 1});
  for (int64_t i = 0; i < g.cell_count(); ++i)
    if (rng.chance(0.4)) g.set(i, true);
  CHECK(from_pgm(to_pgm(g)) == g);

  OccupancyGrid full(Dim::TwoD, {8, 8, 1});
  for (int64_t i = 0; i < full.cell_count(); ++i) full.set(i, true);
  std::string pgm = to_pgm(full);
  CHECK(pgm.find("255 255") != std::string::npos);  // solid white
}

TEST_CASE("voxel text round-trips 3D grids") {
  Rng rng(709);
  OccupancyGrid g(Dim::ThreeD, {32, 32, 32});
  for (int64_t i = 0; i < g.cell_count(); ++i)
    if (rng.chance(0.1)) g.set(i, true);
  CHECK(from_voxel_text(to_voxel_text(g)) == g);
}

TEST_CASE("slice strip has 32 slices side by side") {
  OccupancyGrid g(Dim::ThreeD, {32, 32, 32});
  std::string pgm = to_slice_strip_pgm(g);
  std::istringstream is(pgm);
  std::string magic;
  int w, h;
  is >> magic >> w >> h;
  CHECK(magic == "P2");
  CHECK(w == 32 * 32);
  CHECK(h == 32);
}

TEST_CASE("gen_data rejects degenerate grids and reruns byte-identically") {
  TempDir t1, t2;
  DatasetManifest m1 = gen_data(Dim::TwoD, 6, 2, 99, t1 / "data");
  DatasetManifest m2 = gen_data(Dim::TwoD, 6, 2, 99, t2 / "data");
  REQUIRE(m1.entries.size() == 6);
  for (size_t i = 0; i < m1.entries.size(); ++i) {
    std::string a = slurp(t1 / ("data/" + m1.entries[i].grid_file));
    std::string b = slurp(t2 / ("data/" + m2.entries[i].grid_file));
    CHECK(a == b);
    OccupancyGrid g = decode_grid(a);
    double frac = double(g.count()) / double(g.cell_count());
    CHECK(frac >= 0.01);
    CHECK(frac <= 0.99);
  }
  CHECK(slurp(t1 / "data/manifest.txt") == slurp(t2 / "data/manifest.txt"));

  auto shapes = load_shapes_dir(t1 / "data");
  CHECK(shapes.size() == 6);
  CHECK(shapes[0].id == "shape_0000");
}

TEST_CASE("depth-max 0 yields single-primitive programs") {
  TempDir t;
  gen_data(Dim::TwoD, 4, 0, 5, t / "d");
  for (int i = 0; i < 4; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "d/shape_%04d.csg", i);
    std::string text = slurp(t / name);
    ExprPtr z = parse_program(text, Dim::TwoD);
    CHECK(program_length(*z) == 1);
  }
}

TEST_CASE("cli: unknown subcommand exits 1") {
  CHECK(run_cli({"frobnicate"}) == 1);
  CHECK(run_cli({}) == 1);
}

TEST_CASE("cli: gen-data, execute, eval, render pipeline") {
  TempDir t;
  CHECK(run_cli({"--seed", "3", "gen-data", "--dim", "2", "--count", "2", "--depth-max", "2",
                 "--out-dir", t / "data"}) == 0);
  CHECK(run_cli({"execute", "--program", t / "data/shape_0000.csg", "--res", "64", "--out",
                 t / "g.occ"}) == 0);
  OccupancyGrid direct = load_grid(t / "g.occ");
  OccupancyGrid expect = load_grid(t / "data/shape_0000.occ");
  CHECK(direct == expect);

  CHECK(run_cli({"eval", "--program", t / "data/shape_0000.csg", "--target",
                 t / "data/shape_0000.occ"}) == 0);
  CHECK(run_cli({"render", "--grid", t / "g.occ", "--out", t / "g.pgm"}) == 0);
  CHECK(from_pgm(slurp(t / "g.pgm")) == direct);
  // missing file is a runtime error: exit 2
  CHECK(run_cli({"execute", "--program", t / "missing.csg", "--out", t / "x.occ"}) == 2);
}

TEST_CASE("cli: po and cp emit json and respect --out") {
  TempDir t;
  run_cli({"--seed", "8", "gen-data", "--dim", "2", "--count", "1", "--depth-max", "1",
           "--out-dir", t / "data"});
  CHECK(run_cli({"po", "--program", t / "data/shape_0000.csg", "--target",
                 t / "data/shape_0000.occ", "--steps", "30", "--out", t / "po.csg"}) == 0);
  std::string prog = slurp(t / "po.csg");
  CHECK_NOTHROW(parse_program(prog, Dim::TwoD));
  CHECK(run_cli({"cp", "--program", t / "po.csg", "--target", t / "data/shape_0000.occ"}) == 0);
}

TEST_CASE("cli: config file supplies flags, unknown keys rejected") {
  TempDir t;
  {
    std::ofstream f(t / "run.cfg");
    f << "dim=2\ncount=3\ndepth-max=1\nout-dir=" << (t / "data") << "\n";
  }
  CHECK(run_cli({"gen-data", "--config", t / "run.cfg"}) == 0);
  CHECK(fs::exists(t / "data/manifest.txt"));
  // command line wins over the config file
  CHECK(run_cli({"gen-data", "--config", t / "run.cfg", "--out-dir", t / "data2",
                 "--count", "1"}) == 0);
  auto m = load_manifest(t / "data2/manifest.txt");
  CHECK(m.entries.size() == 1);
  {
    std::ofstream f(t / "bad.cfg");
    f << "dim=2\nbogus-key=1\n";
  }
  CHECK(run_cli({"gen-data", "--config", t / "bad.cfg", "--out-dir", t / "d3"}) == 1);
}

TEST_CASE("cli: COREF_SEED env fallback") {
  TempDir t;
  setenv("COREF_SEED", "1234", 1);
  CHECK(run_cli({"gen-data", "--dim", "2", "--count", "1", "--depth-max", "1", "--out-dir",
                 t / "a"}) == 0);
  unsetenv("COREF_SEED");
  CHECK(run_cli({"--seed", "1234", "gen-data", "--dim", "2", "--count", "1", "--depth-max",
                 "1", "--out-dir", t / "b"}) == 0);
  CHECK(slurp(t / "a/shape_0000.csg") == slurp(t / "b/shape_0000.csg"));
}

TEST_CASE("cli: siri smoke run writes history and checkpoints") {
  TempDir t;
  run_cli({"--seed", "4", "gen-data", "--dim", "2", "--count", "4", "--depth-max", "2",
           "--out-dir", t / "train"});
  run_cli({"--seed", "5", "gen-data", "--dim", "2", "--count", "2", "--depth-max", "2",
           "--out-dir", t / "val"});
  CHECK(run_cli({"--seed", "9", "--threads", "1", "siri", "--mode", "siri", "--rounds", "2",
                 "--beam", "4", "--po-steps", "25", "--train-dir", t / "train", "--val-dir",
                 t / "val", "--out", t / "h.csv"}) == 0);
  std::string csv = slurp(t / "h.csv");
  CHECK(csv.find("round,") == 0);
  CHECK(fs::exists(t / "h.csv.store.txt"));
  CHECK(fs::exists(t / "h.csv.cache.txt"));
}

TEST_CASE("cli: ttr on a generated shape") {
  TempDir t;
  run_cli({"--seed", "6", "gen-data", "--dim", "2", "--count", "1", "--depth-max", "1",
           "--out-dir", t / "data"});
  CHECK(run_cli({"ttr", "--program", t / "data/shape_0000.csg", "--target",
                 t / "data/shape_0000.occ", "--k", "1", "--steps", "25", "--out",
                 t / "ttr.csg"}) == 0);
  CHECK(fs::exists(t / "ttr.csg"));
}
