#pragma once

#include <optional>
#include <string>
#include <vector>

#include "corefdiffs/corpus.hpp"

namespace corefdiffs::eval {

struct F1Pair {
  double uf1 = 0.0;
  double bf1 = 0.0;
};

// Token-overlap F1 between hypothesis and reference. Tokenization: lowercase,
// split on whitespace and punctuation. Overlap is counted over unigram
// (resp. bigram) multisets; empty-vs-empty scores 1, empty-vs-non-empty 0.
F1Pair uf1_bf1(const std::string& hypothesis, const std::string& reference);

double unigram_f1(const std::string& hypothesis, const std::string& reference);

struct SelectionPrediction {
  int topic_index = -1;     // document order within the sample
  int knowledge_index = -1; // flat knowledge order (doc order, then segment)
};

struct SampleLabel {
  int topic_index = -1;
  int knowledge_index = -1;
  // Topic of the most recent labeled agent turn; empty on first-turn samples,
  // which are excluded from the In-TP denominator.
  std::optional<int> prev_topic_index;
};

struct SelectionMetrics {
  double kl = 0.0;
  double tp = 0.0;
  std::optional<double> in_tp;  // empty when no intra-topic samples exist
  int n_samples = 0;
  int n_intra_topic = 0;
};

SelectionMetrics selection_metrics(const std::vector<SelectionPrediction>& predictions,
                                   const std::vector<SampleLabel>& labels);

// Canonical label derivation: topic/knowledge indices in the sample's vertex
// order plus the previous labeled agent turn's topic.
SampleLabel label_of(const corpus::DialogSample& sample);

}  // namespace corefdiffs::eval
