#include <doctest.h>

#include "lisa/config.hpp"
#include "lisa/errors.hpp"

using namespace lisa;

TEST_CASE("empty config keeps defaults") {
  const auto c = parse_run_config("{}");
  CHECK(c.fit.num_books == 8);
  CHECK(c.fit.num_words == 256);
  CHECK(c.forward.mode == AttentionMode::unidirectional);
  CHECK(c.forward.variant == ForwardVariant::base);
  CHECK(!c.forward.scale.has_value());
}

TEST_CASE("full config") {
  const auto c = parse_run_config(R"({
    "fit": {"B": 4, "W": 32, "iters": 7, "seed": 3, "temperature": 0.5},
    "forward": {"mode": "bi", "variant": "soft", "scale": 0.25}
  })");
  CHECK(c.fit.num_books == 4);
  CHECK(c.fit.num_words == 32);
  CHECK(c.fit.iters == 7);
  CHECK(c.fit.seed == 3);
  CHECK(c.fit.temperature == 0.5);
  CHECK(c.forward.mode == AttentionMode::bidirectional);
  CHECK(c.forward.variant == ForwardVariant::soft);
  CHECK(c.forward.scale == 0.25);
  CHECK(!parse_run_config(R"({"forward": {"scale": "rsqrt_d"}})").forward.scale.has_value());
}

TEST_CASE("bad configs") {
  CHECK_THROWS_AS(parse_run_config("{"), InvalidInput);
  CHECK_THROWS_AS(parse_run_config(R"({"fitt": {}})"), InvalidInput);
  CHECK_THROWS_AS(parse_run_config(R"({"fit": {"B": -1}})"), InvalidInput);
  CHECK_THROWS_AS(parse_run_config(R"({"fit": {"temperature": 0}})"), InvalidInput);
  CHECK_THROWS_AS(parse_run_config(R"({"forward": {"mode": "sideways"}})"), InvalidInput);
  CHECK_THROWS_AS(parse_run_config(R"({"forward": {"variant": "mini"}})"), InvalidInput);
  CHECK_THROWS_AS(parse_run_config(R"({"forward": {"scale": "sqrt_d"}})"), InvalidInput);
  CHECK_THROWS_AS(parse_run_config(R"({"forward": {"scale": -2}})"), InvalidInput);
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), Error);
}
