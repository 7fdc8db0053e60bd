#include <doctest.h>

#include <sstream>

#include "hrmix/config.hpp"
#include "hrmix/error.hpp"

using namespace hrmix;

namespace {

PipelineConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ErrorKind kind_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("defaults") {
  const PipelineConfig c;
  CHECK(c.threshold_quantile == 0.95);
  CHECK(c.dependence_u == 20.0);
  CHECK(c.window_width == 10);
  CHECK(c.window_step == 1);
  CHECK(c.clusters == 25);
  CHECK(c.dsga.a1 == 100.0);
  CHECK(c.dsga.batch == 32);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("parsing") {
  const auto c = parse("# run\n clusters = 50 \nrate_h=2.5\ndiagonals = false # 4-neighbour\n"
                       "dsga_kappa = 10\nseed = 18446744073709551615\n\n");
  CHECK(c.clusters == 50);
  CHECK(c.rates.horizontal == 2.5);
  CHECK_FALSE(c.diagonals);
  CHECK(c.dsga.kappa == 10.0);
  CHECK(c.seed == 18446744073709551615ull);

  CHECK(kind_of("no_such_key = 1\n") == ErrorKind::Config);
  CHECK(kind_of("clusters = 2\nclusters = 3\n") == ErrorKind::Config);
  CHECK(kind_of("clusters = two\n") == ErrorKind::Config);
  CHECK(kind_of("clusters\n") == ErrorKind::Config);
  CHECK(kind_of("threshold_quantile = 1.5\n") == ErrorKind::Config);
  CHECK(kind_of("dependence_u = 1\n") == ErrorKind::Config);
  CHECK(kind_of("dsga_batch = 0\n") == ErrorKind::Config);
  try {
    parse("clusters = 2\n\nbogus = 1\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("canonical text round trip") {
  PipelineConfig c;
  c.chi_quantile = 0.9;
  c.rates.diagonal2 = 0.3;
  c.max_windows = 3;
  const auto text = to_text(c);
  CHECK(text.find("chi_quantile = 0.9\n") != std::string::npos);
  CHECK(to_text(parse(text)) == text);
}

TEST_CASE("fnv1a64") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(0xabcull) == "0000000000000abc");
}
