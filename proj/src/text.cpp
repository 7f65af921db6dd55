#include "corefdiffs/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace corefdiffs::text {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

}  // namespace

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (is_word_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::string> tokenize_keep_case(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (is_word_char(c)) {
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::string> capitalized_runs(const std::string& s) {
  std::vector<std::string> runs;
  std::vector<std::string> toks = tokenize_keep_case(s);
  std::string run;
  for (const auto& t : toks) {
    bool cap = !t.empty() && std::isupper(static_cast<unsigned char>(t[0]));
    if (cap) {
      if (!run.empty()) run += ' ';
      run += t;
    } else if (!run.empty()) {
      runs.push_back(run);
      run.clear();
    }
  }
  if (!run.empty()) runs.push_back(run);
  return runs;
}

bool is_capitalized_stopword(const std::string& token) {
  static const std::array<const char*, 22> kStop = {
      "The", "A",  "An", "In",   "On",   "At",   "Of",  "And",  "Or",   "But", "Is",
      "It",  "He", "She", "They", "We",   "I",    "You", "This", "That", "As",  "By"};
  return std::any_of(kStop.begin(), kStop.end(),
                     [&](const char* w) { return token == w; });
}

std::string join(const std::vector<std::string>& tokens, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace corefdiffs::text
