#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rdlearn/config.hpp"
#include "rdlearn/error.hpp"
#include "rdlearn/io.hpp"

using namespace rdlearn;

namespace {

std::string key_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ValidationError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("configuration round-trips through its canonical form") {
  const ExperimentConfig config = parse_config(
      "seed = 9\n[grid]\nnodes = 21\nT = 0.5\nsteps = 10\n[learn]\nlevels = 1..4\n[schedule]\nnu0 = 0.25\n");
  CHECK(config.seed == 9);
  CHECK(config.learn.levels == std::vector<std::size_t>{1, 2, 3, 4});
  const std::string text = serialize_config(config);
  CHECK(serialize_config(parse_config(text)) == text);
}

TEST_CASE("unknown keys and sections are errors") {
  CHECK(key_of("[grid]\nnode = 3\n") == "grid.node");
  CHECK(key_of("[gird]\nnodes = 3\n") == "gird");
  CHECK(key_of("[grid]\nnodes = three\n") == "grid.nodes");
}

TEST_CASE("validation names the violated key") {
  CHECK(key_of("[schedule]\ngamma = 2\n") == "schedule.gamma");
  CHECK(key_of("[reaction]\nmodel = gray-scott\ndiffusion = 0.1\n") == "reaction.diffusion");
  CHECK(key_of("[learn]\nlevels = 3, 2\n") == "learn.levels");
  CHECK(key_of("[learn]\nbox = 1..0\n") == "learn.box");
  CHECK(key_of("[quasipos]\nlevel_count = 1\n") == "quasipos.level_count");
  CHECK(key_of("[wrapper]\neps = 0.1\nweights = 1, 2\n") == "wrapper.weights");
}

TEST_CASE("level lists") {
  CHECK(parse_levels("2..4") == std::vector<std::size_t>{2, 3, 4});
  CHECK(parse_levels("1, 3,8") == std::vector<std::size_t>{1, 3, 8});
  CHECK_THROWS_AS(parse_levels("0..2"), ValidationError);
  CHECK_THROWS_AS(parse_levels("2,2"), ValidationError);
}

TEST_CASE("builders honour the configuration") {
  const ExperimentConfig config = parse_config(
      "[domain]\nextent = 2, 1\n[grid]\nnodes = 5, 3\n[reaction]\nmodel = gray-scott\ndiffusion = 0.2, 0.1\n"
      "[initial]\namplitudes = 0.1, 0.2\nmodes = 1, 2, 3\n[wrapper]\neps = 0.1\n");
  CHECK(config.space_time_grid().node_count() == 15);
  CHECK(config.species() == 2);
  CHECK(config.initial_profiles().size() == 6);
  CHECK(config.make_reaction()->name() == "wrapped gray-scott");
  CHECK(config.make_base_reaction()->name() == "gray-scott");
}

TEST_CASE("SHA-256 of known vectors") {
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("CSV rows use round-trip-safe numbers") {
  io::CsvTable table({"a", "b"});
  table.row({0.1, 1.0 / 3.0});
  CHECK(table.str() == "a,b\n0.10000000000000001,0.33333333333333331\n");
  CHECK(std::stod(io::format_real(0.1)) == 0.1);
  CHECK_THROWS(table.row({1.0}));
}

TEST_CASE("output directory writes files and a manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "rdlearn-test-out";
  std::filesystem::remove_all(dir);
  io::OutputDirectory out(dir.string());
  out.write("x.csv", "abc");
  out.write_manifest();
  std::ifstream manifest(dir / "manifest.txt");
  std::stringstream ss;
  ss << manifest.rdbuf();
  CHECK(ss.str() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  x.csv\n");
  CHECK(io::sha256_file((dir / "x.csv").string()) == io::sha256_hex("abc"));
  std::filesystem::remove_all(dir);
}
