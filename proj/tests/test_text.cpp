#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "corefdiffs/text.hpp"

using namespace corefdiffs;

TEST_CASE("tokenize lowercases and splits on punctuation") {
  auto t = text::tokenize("Hello, World! It's 2-fold.");
  CHECK(t == std::vector<std::string>{"hello", "world", "it", "s", "2", "fold"});
  CHECK(text::tokenize("").empty());
  CHECK(text::tokenize("  ,,  ").empty());
}

TEST_CASE("tokenize_keep_case preserves casing") {
  auto t = text::tokenize_keep_case("the City of London");
  CHECK(t == std::vector<std::string>{"the", "City", "of", "London"});
}

TEST_CASE("capitalized_runs finds maximal runs") {
  auto runs = text::capitalized_runs("Seattle is on the coast of the United States");
  CHECK(runs == std::vector<std::string>{"Seattle", "United States"});
  CHECK(text::capitalized_runs("all lower case").empty());
  auto multi = text::capitalized_runs("between Puget Sound and Lake Washington");
  CHECK(multi == std::vector<std::string>{"Puget Sound", "Lake Washington"});
}

TEST_CASE("capitalized stopwords") {
  CHECK(text::is_capitalized_stopword("The"));
  CHECK(text::is_capitalized_stopword("It"));
  CHECK_FALSE(text::is_capitalized_stopword("Seattle"));
}

TEST_CASE("trim and join") {
  CHECK(text::trim("  a b  ") == "a b");
  CHECK(text::join({"a", "b"}, " ") == "a b");
}
