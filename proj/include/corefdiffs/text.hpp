#pragma once

#include <string>
#include <vector>

namespace corefdiffs::text {

// Lowercases and splits on every non-alphanumeric character.
// This is the tokenizer behind uF1/bF1, pseudo-gold induction and the
// hashing featurizer; it is documented in eval report headers.
std::vector<std::string> tokenize(const std::string& s);

// Splits on whitespace/punctuation but keeps the original casing.
std::vector<std::string> tokenize_keep_case(const std::string& s);

// Maximal runs of capitalized tokens, joined by single spaces.
// Fallback entity extractor for common_entity edges.
std::vector<std::string> capitalized_runs(const std::string& s);

// True for capitalized function words ("The", "It", ...) that should not
// form a coreference mention on their own.
bool is_capitalized_stopword(const std::string& token);

std::string join(const std::vector<std::string>& tokens, const std::string& sep);

std::string trim(const std::string& s);

std::string lower(const std::string& s);

}  // namespace corefdiffs::text
