#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace {

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rdlearn");
  std::ostringstream out, err;
  const int status = rdlearn::cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("invalid input exits with status 2 and names the key") {
  const auto r = run({"wrap-rates", "--beta", "1", "--gamma", "1.5", "--out", "unused"});
  CHECK(r.status == 2);
  CHECK(r.err.find("rates.gamma") != std::string::npos);

  CHECK(run({}).status == 2);
  CHECK(run({"transition", "--bogus"}).status == 2);
  CHECK(run({"check", "--reaction", "no-such-model", "--out", "unused"}).status == 2);
  CHECK(run({"simulate", "--config", "/nonexistent/file.cfg"}).status != 0);
}

TEST_CASE("transition writes the table and a manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "rdlearn-test-cli";
  std::filesystem::remove_all(dir);
  const auto r = run({"transition", "--eps", "0.5", "--samples", "5", "--out", dir.string()});
  REQUIRE(r.status == 0);
  const std::string csv = slurp(dir / "transition.csv");
  CHECK(csv.rfind("x,chi,dchi\n0,1,0\n", 0) == 0);
  CHECK(csv.find("\n1,0,0\n") != std::string::npos);
  CHECK(slurp(dir / "manifest.txt").find("  transition.csv") != std::string::npos);
  std::filesystem::remove_all(dir);
}
