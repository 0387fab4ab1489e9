#include "doctest.h"

#include <stdexcept>

#include "gearpose/config.hpp"

using namespace gearpose;

TEST_CASE("parses sections, comments, and whitespace") {
  const ConfigFile cfg = ConfigFile::parse_string(
      "top = 1\n"
      "[dataset]\n"
      "seed = 42   # trailing comment\n"
      "  count=10\n"
      "; full-line comment\n"
      "\n"
      "[noise]\n"
      "enabled = false\n");
  CHECK(cfg.get_int("top", 0) == 1);
  CHECK(cfg.get_u64("dataset.seed", 0) == 42);
  CHECK(cfg.get_int("dataset.count", 0) == 10);
  CHECK(cfg.get_bool("noise.enabled", true) == false);
  CHECK(cfg.has("dataset.seed"));
  CHECK_FALSE(cfg.has("dataset.missing"));
}

TEST_CASE("later duplicates win") {
  const ConfigFile cfg = ConfigFile::parse_string(
      "[a]\nk = 1\nk = 2\n");
  CHECK(cfg.get_int("a.k", 0) == 2);
}

TEST_CASE("missing keys fall back, malformed values throw") {
  const ConfigFile cfg = ConfigFile::parse_string("[a]\nk = banana\n");
  CHECK(cfg.get_double("a.other", 1.5) == 1.5);
  CHECK(cfg.get_string("a.k", "") == "banana");
  CHECK_THROWS_AS(cfg.get_double("a.k", 0.0), std::runtime_error);
  CHECK_THROWS_AS(cfg.get_int("a.k", 0), std::runtime_error);
  CHECK_THROWS_AS(cfg.get_bool("a.k", false), std::runtime_error);
}

TEST_CASE("boolean spellings") {
  const ConfigFile cfg = ConfigFile::parse_string(
      "a = true\nb = 1\nc = yes\nd = on\ne = false\nf = 0\ng = no\nh = off\n");
  CHECK(cfg.get_bool("a", false));
  CHECK(cfg.get_bool("b", false));
  CHECK(cfg.get_bool("c", false));
  CHECK(cfg.get_bool("d", false));
  CHECK_FALSE(cfg.get_bool("e", true));
  CHECK_FALSE(cfg.get_bool("f", true));
  CHECK_FALSE(cfg.get_bool("g", true));
  CHECK_FALSE(cfg.get_bool("h", true));
}

TEST_CASE("parse errors carry line numbers") {
  try {
    ConfigFile::parse_string("ok = 1\n\nnot a pair\n");
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(ConfigFile::parse_string("[unterminated\n"),
                  std::runtime_error);
  CHECK_THROWS_AS(ConfigFile::parse_string("[]\n"), std::runtime_error);
  CHECK_THROWS_AS(ConfigFile::parse_string("= value\n"), std::runtime_error);
}

TEST_CASE("missing config file throws") {
  CHECK_THROWS_AS(ConfigFile::parse_file("/nonexistent/config.ini"),
                  std::runtime_error);
}

TEST_CASE("config hash ignores declaration order") {
  const ConfigFile a = ConfigFile::parse_string("[s]\nx = 1\ny = 2\n");
  const ConfigFile b = ConfigFile::parse_string("[s]\ny = 2\nx = 1\n");
  CHECK(config_hash(a) == config_hash(b));
  const ConfigFile c = ConfigFile::parse_string("[s]\nx = 1\ny = 3\n");
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("empty config hashes to the FNV-1a offset basis") {
  const ConfigFile empty = ConfigFile::parse_string("");
  CHECK(config_hash(empty) == 0xcbf29ce484222325ULL);
  CHECK(config_hash_hex(empty) == "cbf29ce484222325");
}

TEST_CASE("single-pair hash matches a hand-computed FNV-1a digest") {
  // FNV-1a over the bytes of "a=1\n": h = (((basis ^ 'a') * p ^ '=') * p ...
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : {'a', '=', '1', '\n'}) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  const ConfigFile cfg = ConfigFile::parse_string("a = 1\n");
  CHECK(config_hash(cfg) == h);
}
