#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "corefdiffs/corpus.hpp"
#include "corefdiffs/encoder.hpp"
#include "corefdiffs/graph.hpp"
#include "corefdiffs/metrics.hpp"
#include "corefdiffs/model.hpp"

namespace corefdiffs::trainer {

struct TrainConfig {
  model::ModelConfig dims;             // includes the component ablation
  graph::GraphVariantConfig variant;
  double lr = 1e-3;
  int warmup_steps = 50;
  int epochs = 50;
  long total_steps = -1;               // linear-decay endpoint; derived when < 0
  uint64_t seed = 1;
  double holdout_fraction = 0.0;       // tail fraction held out; 0 = eval on train
  int patience = 10;                   // early stopping on held-out KL
  bool shuffle = true;
  int j_max = 40;
  double stop_at_kl = -1.0;            // optional targets; stop once both reached
  double stop_at_tp = -1.0;

  void validate() const;
  uint64_t hash(int n_edge_types) const;
};

// Learning rate at 1-based step s: lr*s/warmup during warmup, then linear
// decay to zero at total_steps.
double lr_at(double lr, int warmup_steps, long total_steps, long step);

struct TraceRecord {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double kl = -1.0;  // filled on epoch-end records
  double tp = -1.0;
};

struct Checkpoint {
  model::ModelConfig config;
  int n_edge_types = 0;
  uint64_t config_hash = 0;
  std::vector<std::string> vocab_names;
  long step = 0;
  double kl = 0.0, tp = 0.0;  // metric snapshot at save time
  std::map<std::string, Eigen::MatrixXd> tensors;
  std::map<std::string, Eigen::MatrixXd> adam_m, adam_v;

  void save(const std::string& path) const;
  std::string serialize() const;
  static Checkpoint load(const std::string& path);
  static Checkpoint deserialize(const std::string& bytes);

  // Rebuilds the model; throws on dim mismatches.
  model::Model restore() const;
  // Rejects checkpoints whose edge vocabulary differs from `vocab`.
  void check_vocab(const graph::EdgeVocab& vocab) const;
};

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(model::ModelParams& params,
            const std::map<std::string, Eigen::MatrixXd>& grads, double lr);

  long t() const { return t_; }
  const std::map<std::string, Eigen::MatrixXd>& m() const { return m_; }
  const std::map<std::string, Eigen::MatrixXd>& v() const { return v_; }
  void restore(long t, std::map<std::string, Eigen::MatrixXd> m,
               std::map<std::string, Eigen::MatrixXd> v);

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Eigen::MatrixXd> m_, v_;
};

// Per-sample bundles (graph, H0, instance, label), built once and reused
// across epochs; immutable afterwards.
struct PreparedCorpus {
  std::shared_ptr<const graph::EdgeVocab> vocab;
  std::vector<model::Instance> instances;
  std::vector<eval::SampleLabel> labels;
  std::vector<std::string> sample_ids;

  static PreparedCorpus build(const std::vector<corpus::DialogSample>& samples,
                              const corpus::Resources& resources,
                              const graph::GraphVariantConfig& variant,
                              const encoder::EmbeddingProvider& provider,
                              int history_slots, int j_max);
};

eval::SelectionMetrics evaluate(const model::Model& m, const PreparedCorpus& prepared,
                                const std::vector<size_t>& subset);

struct TrainResult {
  Checkpoint best;
  std::vector<TraceRecord> trace;
  eval::SelectionMetrics final_metrics;  // on the held-out split (or train)
  int epochs_run = 0;
  std::vector<size_t> train_indices, eval_indices;
};

TrainResult train(const TrainConfig& config,
                  const std::vector<corpus::DialogSample>& samples,
                  const corpus::Resources& resources,
                  const encoder::EmbeddingProvider& provider);

void write_trace_jsonl(const std::vector<TraceRecord>& trace, const std::string& path);

}  // namespace corefdiffs::trainer
