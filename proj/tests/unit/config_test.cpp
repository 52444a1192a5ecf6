// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "doctest.h"
#include "test_util.hpp"
#include "wsmt/config.hpp"

using namespace wsmt;
using namespace wsmt::test;

TEST_SUITE("config") {

TEST_CASE("parsing skips comments and blank lines") {
  ConfigMap cfg = parse_config_text(
      "# header comment\n"
      "\n"
      "run.seed = 7\n"
      "data.train = path/x.src  # trailing comment\n"
      "  model.hidden_dim=64\n");
  CHECK(cfg.size() == 3);
  CHECK(cfg.at("run.seed") == "7");
  CHECK(cfg.at("data.train") == "path/x.src");
  CHECK(cfg.at("model.hidden_dim") == "64");
}

TEST_CASE("missing equals reports the line number") {
  try {
    parse_config_text("a = 1\nbroken line\n");
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("2") != std::string::npos);
  }
}

TEST_CASE("empty keys are rejected") {
  CHECK_THROWS_AS(parse_config_text(" = value\n"), std::runtime_error);
}

TEST_CASE("later assignments win") {
  ConfigMap cfg = parse_config_text("k = 1\nk = 2\n");
  CHECK(cfg.at("k") == "2");
}

TEST_CASE("save and load round trip") {
  TempDir tmp;
  ConfigMap cfg{{"b.key", "two words"}, {"a.key", "1"}};
  save_config(cfg, tmp.file("c.cfg"));
  ConfigMap back = load_config(tmp.file("c.cfg"));
  CHECK(back == cfg);
}

TEST_CASE("overrides replace file values") {
  ConfigMap cfg{{"run.seed", "1"}, {"x", "a"}};
  apply_overrides(cfg, {"run.seed=9", "new.key=fresh"});
  CHECK(cfg.at("run.seed") == "9");
  CHECK(cfg.at("new.key") == "fresh");
  CHECK(cfg.at("x") == "a");
  CHECK_THROWS_AS(apply_overrides(cfg, {"no_equals"}), std::runtime_error);
}

TEST_CASE("typed getters parse and validate") {
  ConfigMap cfg{{"i", "42"}, {"d", "2.5"}, {"t", "true"}, {"f", "0"}, {"s", "text"},
                {"neg", "-3"}, {"badint", "4x"}};
  CHECK(get_int(cfg, "i", 0) == 42);
  CHECK(get_long(cfg, "i", 0) == 42);
  CHECK(get_int(cfg, "neg", 0) == -3);
  CHECK(get_double(cfg, "d", 0.0) == 2.5);
  CHECK(get_bool(cfg, "t", false));
  CHECK_FALSE(get_bool(cfg, "f", true));
  CHECK(get_string(cfg, "s") == "text");
  CHECK(get_int(cfg, "absent", 7) == 7);
  CHECK(get_double(cfg, "absent", 1.5) == 1.5);
  CHECK(get_bool(cfg, "absent", true));
  CHECK_THROWS_AS(get_int(cfg, "badint", 0), std::runtime_error);
  CHECK_THROWS_AS(get_bool(cfg, "s", false), std::runtime_error);
  CHECK_THROWS_AS(get_double(cfg, "s", 0.0), std::runtime_error);
}

TEST_CASE("missing required keys name the key") {
  ConfigMap cfg;
  try {
    get_string(cfg, "data.train_src");
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("data.train_src") != std::string::npos);
  }
}

TEST_CASE("bool accepts the documented spellings") {
  ConfigMap cfg{{"a", "yes"}, {"b", "no"}, {"c", "1"}, {"d", "false"}};
  CHECK(get_bool(cfg, "a", false));
  CHECK_FALSE(get_bool(cfg, "b", true));
  CHECK(get_bool(cfg, "c", false));
  CHECK_FALSE(get_bool(cfg, "d", true));
}

}
