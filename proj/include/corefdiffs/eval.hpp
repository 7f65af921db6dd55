#pragma once

#include <optional>
#include <string>
#include <vector>

#include "corefdiffs/metrics.hpp"
#include "corefdiffs/trainer.hpp"

namespace corefdiffs::eval {

struct PredictionRow {
  std::string sample_id;
  int pred_topic = -1, gold_topic = -1;
  int pred_knowledge = -1, gold_knowledge = -1;
  bool intra_topic = false;
};

struct CorpusEvaluation {
  SelectionMetrics metrics;
  std::vector<PredictionRow> rows;
  std::optional<double> uf1, bf1;  // response overlap when hypotheses are given
};

CorpusEvaluation evaluate_corpus(const model::Model& m,
                                 const trainer::PreparedCorpus& prepared,
                                 const std::vector<size_t>& subset);

// Averages uF1/bF1 of hypotheses (keyed by sample id) against the samples'
// reference responses; samples without a hypothesis or reference are skipped.
std::pair<double, double> response_overlap(
    const std::vector<corpus::DialogSample>& samples,
    const std::map<std::string, std::string>& hypotheses);

void write_predictions_jsonl(const std::vector<PredictionRow>& rows, const std::string& path);

struct EvalReport {
  std::string split_name;
  CorpusEvaluation evaluation;
  std::string tokenizer_note =
      "uF1/bF1 tokenization: lowercase, split on whitespace and punctuation";
  std::string render_json() const;
  std::string render_csv() const;
};

// ---- graph/component ablation grid ----

struct GridEntry {
  std::string name;
  graph::GraphVariantConfig variant;
  model::Ablation ablation = model::Ablation::none;
};

// JSON: [ {"name": ..., "variant": "<variant name>", "ablation": "<name>"} ];
// "variant" may also be an object with the GraphVariantConfig fields.
std::vector<GridEntry> load_grid(const std::string& path);
std::vector<GridEntry> full_variant_grid();  // all eight named graph variants

struct VariantResult {
  std::string name;
  bool ok = false;
  std::string error;
  SelectionMetrics train, heldout;
  bool has_heldout = false;  // a real held-out split existed
};

struct AblationReport {
  std::vector<VariantResult> rows;
  uint64_t seed = 0;
  std::string render_csv() const;
  std::string render_json() const;  // includes full-scale reference footnotes
};

AblationReport ablate(const trainer::TrainConfig& base, const std::vector<GridEntry>& grid,
                      const std::vector<corpus::DialogSample>& samples,
                      const corpus::Resources& resources,
                      const encoder::EmbeddingProvider& provider, int threads = 1);

}  // namespace corefdiffs::eval
