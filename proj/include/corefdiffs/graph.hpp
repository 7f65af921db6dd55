#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "corefdiffs/corpus.hpp"

namespace corefdiffs::graph {

enum class EdgeFamily { topic_knowledge, topic_topic, knowledge_knowledge, self_loop };

struct EdgeType {
  EdgeFamily family;
  std::string name;
  int id = -1;
};

// Frozen edge-type vocabulary with dense ids, assigned once per run and
// shared by train and eval. Layout: self_loop, sent_1..sent_Jmax, sent_max,
// word_overlap, commonsense:<kept relation> (sorted), others,
// coreference_link, common_entity, partial_order.
class EdgeVocab {
 public:
  static std::shared_ptr<const EdgeVocab> build(int j_max,
                                                const corpus::RelationTable& relations);

  int size() const { return static_cast<int>(types_.size()); }
  const EdgeType& type(int id) const;
  int id_of(const std::string& name) const;  // throws on unknown names

  // sent_j with the J_max overflow bucket.
  int sent_type_id(int segment_index) const;
  // commonsense:<relation>; `relation` must already be remapped by the table.
  int commonsense_type_id(const std::string& relation) const;

  int self_loop_id() const { return self_loop_id_; }
  int word_overlap_id() const { return word_overlap_id_; }
  int others_id() const { return others_id_; }
  int coreference_id() const { return coreference_id_; }
  int common_entity_id() const { return common_entity_id_; }
  int partial_order_id() const { return partial_order_id_; }
  int j_max() const { return j_max_; }

  const std::vector<EdgeType>& types() const { return types_; }

 private:
  std::vector<EdgeType> types_;
  std::map<std::string, int> by_name_;
  int j_max_ = 0;
  int self_loop_id_ = -1, word_overlap_id_ = -1, others_id_ = -1;
  int coreference_id_ = -1, common_entity_id_ = -1, partial_order_id_ = -1;
};

struct Edge {
  int src = -1;
  int dst = -1;
  int type = -1;

  friend bool operator<(const Edge& a, const Edge& b) {
    if (a.src != b.src) return a.src < b.src;
    if (a.dst != b.dst) return a.dst < b.dst;
    return a.type < b.type;
  }
  friend bool operator==(const Edge& a, const Edge& b) {
    return a.src == b.src && a.dst == b.dst && a.type == b.type;
  }
};

enum class KnowledgeEdgeMode { coreference, common_entity, partial_order, none };

struct GraphVariantConfig {
  bool topic_edges = true;            // master switch for inter-topic edges
  bool word_overlap = true;
  bool commonsense = true;
  KnowledgeEdgeMode knowledge_mode = KnowledgeEdgeMode::coreference;
  int partial_order_hop = 2;
  bool topic_knowledge_edges = true;

  // Named variants: full, no_tp, no_tp_overlap, no_tp_wikigraph, no_kg,
  // kg_common_entity, kg_partial_order, no_tp_kg.
  static GraphVariantConfig from_name(const std::string& name);
  static const std::vector<std::string>& variant_names();
  std::string canonical_name() const;

  void validate() const;
};

// Per-sample heterogeneous graph. Vertex ids: topics 0..M-1 in document
// order, then knowledge vertices in (document, segment) order.
struct CorefMDG {
  std::string sample_id;
  std::vector<std::string> topic_doc_ids;                    // M entries
  std::vector<std::pair<std::string, int>> knowledge_refs;   // N entries
  std::vector<Edge> edges;                                   // sorted, deduped
  std::shared_ptr<const EdgeVocab> vocab;

  int num_topics() const { return static_cast<int>(topic_doc_ids.size()); }
  int num_knowledge() const { return static_cast<int>(knowledge_refs.size()); }
  int num_vertices() const { return num_topics() + num_knowledge(); }

  int topic_vertex(const std::string& doc_id) const;          // -1 when absent
  int knowledge_vertex(const std::string& doc_id, int segment_index) const;
  int parent_topic_of(int knowledge_vertex_id) const;
  bool is_topic(int vertex_id) const { return vertex_id < num_topics(); }
};

CorefMDG build_graph(const corpus::DialogSample& sample,
                     const corpus::Resources& resources,
                     const GraphVariantConfig& variant,
                     std::shared_ptr<const EdgeVocab> vocab);

// Per-family constructors, in global vertex-id space so that build_graph is
// exactly their union (tested). `topic_vertex` / `first_knowledge_vertex`
// anchor the document's vertices.
std::vector<Edge> topic_knowledge_edges(const corpus::Document& doc, int topic_vertex,
                                        int first_knowledge_vertex, const EdgeVocab& vocab);
std::vector<Edge> word_overlap_edges(const std::vector<std::string>& topic_phrases,
                                     const corpus::LemmaTable& lemmas,
                                     const EdgeVocab& vocab);
std::vector<Edge> commonsense_edges(const std::vector<std::string>& topic_phrases,
                                    const corpus::RelationTable& table,
                                    const EdgeVocab& vocab);
std::vector<Edge> coreference_edges(const corpus::Document& doc,
                                    const corpus::CorefAnnotation& ann,
                                    int first_knowledge_vertex, const EdgeVocab& vocab);
std::vector<Edge> common_entity_edges(const corpus::Document& doc,
                                      const std::vector<std::set<std::string>>& entities,
                                      int first_knowledge_vertex, const EdgeVocab& vocab);
std::vector<Edge> partial_order_edges(const corpus::Document& doc, int hop,
                                      int first_knowledge_vertex, const EdgeVocab& vocab);

// Rule family used for statistics, from a type name: sent, word_overlap,
// commonsense, coreference_link, common_entity, partial_order, self_loop.
std::string stat_family(const std::string& type_name);

struct GraphStats {
  std::map<std::string, double> avg_per_family;  // undirected edges per sample
  int n_graphs = 0;
};

GraphStats graph_stats(const std::vector<CorefMDG>& graphs);

void write_dot(const CorefMDG& g, const corpus::DialogSample& sample, std::ostream& out);
std::string to_json(const CorefMDG& g);  // stable field order

}  // namespace corefdiffs::graph
