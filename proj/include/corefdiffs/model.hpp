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
#include "corefdiffs/tape.hpp"

namespace corefdiffs::model {

enum class Ablation { none, no_diff_seq, no_diff, no_res_rgat };

std::string ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& name);

struct ModelConfig {
  int d_init = 32;
  int d_g = 32;
  int d_e = 16;
  int heads = 4;
  int layers = 2;
  double leaky_alpha = 0.2;
  int history_slots = 2;  // l
  int tau = -1;           // history sequence length; < 0 means "same as l"
  int gru_layers = 2;
  Ablation ablation = Ablation::none;

  int resolved_tau() const { return tau < 0 ? history_slots : tau; }
  uint64_t hash(int n_edge_types) const;

  static ModelConfig desk();
  static ModelConfig paper();  // 320 / 1024 / 64 / 8 profile
};

// Model-side view of a CorefMDG: flat edge arrays plus per-vertex lookups in
// canonical order (topics 0..M-1, then knowledge vertices).
struct GraphView {
  int num_topics = 0;
  int num_knowledge = 0;
  ad::Tape::Index src, dst, type;      // one entry per directed edge
  ad::Tape::Index kind_index;          // per vertex: 0 = topic row, 1 = knowledge row
  std::vector<int> parent_topic;       // per knowledge vertex, global topic id
  std::vector<int> sent_type;          // per knowledge vertex, sent_j type id
  int n_edge_types = 0;

  int num_vertices() const { return num_topics + num_knowledge; }
  static GraphView from(const graph::CorefMDG& g);
};

// Everything the model needs for one sample, precomputable once per epoch.
struct Instance {
  GraphView g;
  Eigen::MatrixXd h0;
  int gold_topic = -1;
  int gold_knowledge = -1;             // local knowledge index 0..N-1
  std::vector<int> hist_topic;         // newest-first, one per slot; -1 = missing
  std::vector<int> hist_knowledge;     // local indices, aligned with hist_topic
  std::string sample_id;

  static Instance build(const corpus::DialogSample& sample, const graph::CorefMDG& g,
                        const encoder::VertexEmbeddings& h0, int history_slots);
};

struct RgatHeadParams {
  Eigen::MatrixXd proj;       // d_in x d_in, applied as x * proj
  Eigen::MatrixXd edge_proj;  // d_e x d_in
  Eigen::MatrixXd attn_dst;   // d_in x 1
  Eigen::MatrixXd attn_src;   // d_in x 1
  Eigen::MatrixXd attn_edge;  // d_in x 1
};

struct RgatLayerParams {
  std::vector<RgatHeadParams> heads;
  Eigen::MatrixXd out;  // 2*d_in x d_out
};

struct GruLayerParams {
  Eigen::MatrixXd wz, wr, wh;  // (d_x + d_h) x d_h
  Eigen::MatrixXd bz, br, bh;  // 1 x d_h
};

struct HeadParams {
  Eigen::MatrixXd w;  // in x 1
  Eigen::MatrixXd b;  // 1 x 1
};

struct ModelParams {
  Eigen::MatrixXd edge_table;  // E x d_e
  std::vector<RgatLayerParams> rgat;
  std::vector<GruLayerParams> gru;
  Eigen::MatrixXd null_hist;  // 1 x d_g, pads short histories
  HeadParams topic_head;
  HeadParams knowledge_head;
  std::vector<HeadParams> hist_topic_heads;      // one per history slot
  std::vector<HeadParams> hist_knowledge_heads;
  Eigen::MatrixXd adapter;  // d_init x d_g, used only by the no_res_rgat wiring

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("edge_table", edge_table);
    for (size_t i = 0; i < rgat.size(); ++i) {
      for (size_t h = 0; h < rgat[i].heads.size(); ++h) {
        auto p = "rgat." + std::to_string(i) + ".head." + std::to_string(h) + ".";
        fn(p + "proj", rgat[i].heads[h].proj);
        fn(p + "edge_proj", rgat[i].heads[h].edge_proj);
        fn(p + "attn_dst", rgat[i].heads[h].attn_dst);
        fn(p + "attn_src", rgat[i].heads[h].attn_src);
        fn(p + "attn_edge", rgat[i].heads[h].attn_edge);
      }
      fn("rgat." + std::to_string(i) + ".out", rgat[i].out);
    }
    for (size_t i = 0; i < gru.size(); ++i) {
      auto p = "gru." + std::to_string(i) + ".";
      fn(p + "wz", gru[i].wz);
      fn(p + "wr", gru[i].wr);
      fn(p + "wh", gru[i].wh);
      fn(p + "bz", gru[i].bz);
      fn(p + "br", gru[i].br);
      fn(p + "bh", gru[i].bh);
    }
    fn("null_hist", null_hist);
    fn("head.topic.w", topic_head.w);
    fn("head.topic.b", topic_head.b);
    fn("head.knowledge.w", knowledge_head.w);
    fn("head.knowledge.b", knowledge_head.b);
    for (size_t i = 0; i < hist_topic_heads.size(); ++i) {
      auto p = "hist." + std::to_string(i) + ".";
      fn(p + "topic.w", hist_topic_heads[i].w);
      fn(p + "topic.b", hist_topic_heads[i].b);
      fn(p + "knowledge.w", hist_knowledge_heads[i].w);
      fn(p + "knowledge.b", hist_knowledge_heads[i].b);
    }
    if (adapter.size() > 0) fn("adapter", adapter);
  }
};

struct LossBreakdown {
  double total = 0.0;
  double knowledge = 0.0;
  double topic = 0.0;
  double history = 0.0;
};

struct ModelOutput {
  Eigen::VectorXd topic_logits;
  Eigen::VectorXd knowledge_logits;
  std::vector<Eigen::VectorXd> hist_topic_logits;
  std::vector<Eigen::VectorXd> hist_knowledge_logits;
  Eigen::MatrixXd hg;  // (M+N) x d_g
  Eigen::MatrixXd hd;  // (M+N) x 2*d_g
  int topic_argmax = -1;
  int knowledge_argmax = -1;  // local knowledge index
};

// Lowest index wins ties.
int argmax_lowest(const Eigen::VectorXd& v);

// Binds parameter matrices to tape leaves at most once per tape, so a shared
// tensor accumulates gradient from all of its uses.
class Binder {
 public:
  Binder(ad::Tape& tape, bool with_grad) : tape_(tape), with_grad_(with_grad) {}
  ad::Var operator()(const Eigen::MatrixXd& m);

 private:
  ad::Tape& tape_;
  bool with_grad_;
  std::map<const Eigen::MatrixXd*, ad::Var> bound_;
};

class Model {
 public:
  Model(ModelConfig cfg, int n_edge_types, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  int n_edge_types() const { return n_edge_types_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  struct ForwardVars {
    ad::Var loss, loss_knl, loss_tpc, loss_hist;
    ad::Var topic_logits, knowledge_logits;
    std::vector<ad::Var> hist_topic_logits, hist_knowledge_logits;
    ad::Var hg, hd;
  };

  // Full forward pass; `attention` (when given) collects the per-layer,
  // per-head neighborhood weights in edge order.
  ForwardVars forward(ad::Tape& tape, Binder& bind, const Instance& inst,
                      std::vector<Eigen::VectorXd>* attention = nullptr) const;

  // One Res-RGAT layer (attention over typed in-edges, concatenated
  // residual, linear output transform) on an existing tape.
  ad::Var rgat_layer(ad::Tape& tape, Binder& bind, ad::Var h_in, const GraphView& g,
                     ad::Var edge_table, const RgatLayerParams& layer,
                     std::vector<Eigen::VectorXd>* attention = nullptr) const;

  // Stacked propagation H0 -> HG (honors the no_res_rgat wiring).
  ad::Var propagate(ad::Tape& tape, Binder& bind, ad::Var h0, const GraphView& g) const;

  // HG -> HD via the knowledge-shift sequence (honors no_diff_seq / no_diff).
  ad::Var linearize(ad::Tape& tape, Binder& bind, ad::Var hg, const Instance& inst) const;

  ModelOutput predict(const Instance& inst) const;
  LossBreakdown loss_value(const Instance& inst) const;
  std::map<std::string, Eigen::MatrixXd> gradients(const Instance& inst,
                                                   LossBreakdown* breakdown = nullptr);

 private:
  ad::Var gru_cell(ad::Tape& tape, Binder& bind, ad::Var x, ad::Var h,
                   const GruLayerParams& p) const;
  ad::Var score_topic(ad::Tape& tape, Binder& bind, ad::Var hd, const GraphView& g,
                      const HeadParams& head) const;
  ad::Var score_knowledge(ad::Tape& tape, Binder& bind, ad::Var hd, ad::Var edge_table,
                          const GraphView& g, const HeadParams& head) const;

  ModelConfig cfg_;
  int n_edge_types_ = 0;
  ModelParams params_;
};

// Element-wise comparison F(a, b) = [a - b ; a .* b] on plain vectors;
// the tape route lives in Model::linearize.
Eigen::VectorXd diff_compare(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// The (topic vertex, knowledge vertex) pair backing each time step of the
// knowledge-shift sequence, oldest first; (-1, -1) marks a padded slot.
std::vector<std::pair<int, int>> history_slot_vertices(const Instance& inst, int tau);

}  // namespace corefdiffs::model
