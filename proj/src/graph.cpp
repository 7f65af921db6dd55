#include "corefdiffs/graph.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "corefdiffs/errors.hpp"
#include "corefdiffs/text.hpp"

namespace corefdiffs::graph {

std::shared_ptr<const EdgeVocab> EdgeVocab::build(int j_max,
                                                  const corpus::RelationTable& relations) {
  if (j_max < 1) throw ValidationError("EdgeVocab: j_max must be >= 1");
  auto v = std::make_shared<EdgeVocab>();
  v->j_max_ = j_max;
  auto add = [&](EdgeFamily fam, const std::string& name) {
    int id = static_cast<int>(v->types_.size());
    v->types_.push_back({fam, name, id});
    v->by_name_[name] = id;
    return id;
  };
  v->self_loop_id_ = add(EdgeFamily::self_loop, "self_loop");
  for (int j = 1; j <= j_max; ++j)
    add(EdgeFamily::topic_knowledge, "sent_" + std::to_string(j));
  add(EdgeFamily::topic_knowledge, "sent_max");
  v->word_overlap_id_ = add(EdgeFamily::topic_topic, "word_overlap");
  for (const auto& rel : relations.kept_relations())
    add(EdgeFamily::topic_topic, "commonsense:" + rel);
  v->others_id_ = add(EdgeFamily::topic_topic, relations.others_label());
  v->coreference_id_ = add(EdgeFamily::knowledge_knowledge, "coreference_link");
  v->common_entity_id_ = add(EdgeFamily::knowledge_knowledge, "common_entity");
  v->partial_order_id_ = add(EdgeFamily::knowledge_knowledge, "partial_order");
  return v;
}

const EdgeType& EdgeVocab::type(int id) const {
  if (id < 0 || id >= size())
    throw ValidationError("EdgeVocab: type id " + std::to_string(id) + " out of range");
  return types_[static_cast<size_t>(id)];
}

int EdgeVocab::id_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ValidationError("EdgeVocab: unknown edge type " + name);
  return it->second;
}

int EdgeVocab::sent_type_id(int segment_index) const {
  if (segment_index < 1)
    throw ValidationError("sent_type_id: segment index must be >= 1");
  if (segment_index <= j_max_) return 1 + (segment_index - 1);  // after self_loop
  return 1 + j_max_;                                            // sent_max bucket
}

int EdgeVocab::commonsense_type_id(const std::string& relation) const {
  auto it = by_name_.find("commonsense:" + relation);
  if (it != by_name_.end()) return it->second;
  return others_id_;
}

GraphVariantConfig GraphVariantConfig::from_name(const std::string& name) {
  GraphVariantConfig v;
  if (name == "full") return v;
  if (name == "no_tp") {
    v.topic_edges = false;
    return v;
  }
  if (name == "no_tp_overlap") {
    v.word_overlap = false;
    return v;
  }
  if (name == "no_tp_wikigraph") {
    v.commonsense = false;
    return v;
  }
  if (name == "no_kg") {
    v.knowledge_mode = KnowledgeEdgeMode::none;
    return v;
  }
  if (name == "kg_common_entity") {
    v.knowledge_mode = KnowledgeEdgeMode::common_entity;
    return v;
  }
  if (name == "kg_partial_order") {
    v.knowledge_mode = KnowledgeEdgeMode::partial_order;
    return v;
  }
  if (name == "no_tp_kg") {
    v.topic_knowledge_edges = false;
    return v;
  }
  throw ValidationError("unknown graph variant '" + name + "'");
}

const std::vector<std::string>& GraphVariantConfig::variant_names() {
  static const std::vector<std::string> names = {
      "full",  "no_tp", "no_tp_overlap", "no_tp_wikigraph",
      "no_kg", "kg_common_entity", "kg_partial_order", "no_tp_kg"};
  return names;
}

std::string GraphVariantConfig::canonical_name() const {
  for (const auto& n : variant_names()) {
    GraphVariantConfig ref = from_name(n);
    if (ref.topic_edges == topic_edges && ref.word_overlap == word_overlap &&
        ref.commonsense == commonsense && ref.knowledge_mode == knowledge_mode &&
        ref.topic_knowledge_edges == topic_knowledge_edges &&
        (knowledge_mode != KnowledgeEdgeMode::partial_order ||
         ref.partial_order_hop == partial_order_hop))
      return n;
  }
  return "custom";
}

void GraphVariantConfig::validate() const {
  if (knowledge_mode == KnowledgeEdgeMode::partial_order && partial_order_hop < 1)
    throw ValidationError("graph variant: partial_order hop must be >= 1");
}

int CorefMDG::topic_vertex(const std::string& doc_id) const {
  for (size_t i = 0; i < topic_doc_ids.size(); ++i)
    if (topic_doc_ids[i] == doc_id) return static_cast<int>(i);
  return -1;
}

int CorefMDG::knowledge_vertex(const std::string& doc_id, int segment_index) const {
  for (size_t i = 0; i < knowledge_refs.size(); ++i)
    if (knowledge_refs[i].first == doc_id && knowledge_refs[i].second == segment_index)
      return num_topics() + static_cast<int>(i);
  return -1;
}

int CorefMDG::parent_topic_of(int knowledge_vertex_id) const {
  int local = knowledge_vertex_id - num_topics();
  if (local < 0 || local >= num_knowledge())
    throw ValidationError("parent_topic_of: vertex " + std::to_string(knowledge_vertex_id) +
                          " is not a knowledge vertex");
  return topic_vertex(knowledge_refs[static_cast<size_t>(local)].first);
}

std::vector<Edge> topic_knowledge_edges(const corpus::Document& doc, int topic_vertex,
                                        int first_knowledge_vertex,
                                        const EdgeVocab& vocab) {
  std::vector<Edge> out;
  for (const auto& seg : doc.segments) {
    int k = first_knowledge_vertex + seg.index - 1;
    int t = vocab.sent_type_id(seg.index);
    out.push_back({topic_vertex, k, t});
    out.push_back({k, topic_vertex, t});
  }
  return out;
}

namespace {

std::set<std::string> lemma_set(const std::string& phrase, const corpus::LemmaTable& lemmas) {
  std::set<std::string> out;
  for (const auto& tok : text::tokenize(phrase)) out.insert(lemmas.lemma(tok));
  return out;
}

bool intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a)
    if (b.count(x)) return true;
  return false;
}

}  // namespace

std::vector<Edge> word_overlap_edges(const std::vector<std::string>& topic_phrases,
                                     const corpus::LemmaTable& lemmas,
                                     const EdgeVocab& vocab) {
  std::vector<std::set<std::string>> sets;
  sets.reserve(topic_phrases.size());
  for (const auto& p : topic_phrases) sets.push_back(lemma_set(p, lemmas));

  std::vector<Edge> out;
  for (size_t i = 0; i < sets.size(); ++i) {
    for (size_t j = i + 1; j < sets.size(); ++j) {
      if (intersects(sets[i], sets[j])) {
        out.push_back({static_cast<int>(i), static_cast<int>(j), vocab.word_overlap_id()});
        out.push_back({static_cast<int>(j), static_cast<int>(i), vocab.word_overlap_id()});
      }
    }
  }
  return out;
}

std::vector<Edge> commonsense_edges(const std::vector<std::string>& topic_phrases,
                                    const corpus::RelationTable& table,
                                    const EdgeVocab& vocab) {
  std::vector<Edge> out;
  for (size_t i = 0; i < topic_phrases.size(); ++i) {
    for (size_t j = i + 1; j < topic_phrases.size(); ++j) {
      auto fwd = table.lookup(topic_phrases[i], topic_phrases[j]);
      auto rev = table.lookup(topic_phrases[j], topic_phrases[i]);
      int a = static_cast<int>(i), b = static_cast<int>(j);
      if (fwd) out.push_back({a, b, vocab.commonsense_type_id(*fwd)});
      if (rev) out.push_back({b, a, vocab.commonsense_type_id(*rev)});
      // keep connectivity symmetric: a stored direction implies an
      // others-typed reverse edge
      if (fwd && !rev) out.push_back({b, a, vocab.others_id()});
      if (rev && !fwd) out.push_back({a, b, vocab.others_id()});
    }
  }
  return out;
}

std::vector<Edge> coreference_edges(const corpus::Document& doc,
                                    const corpus::CorefAnnotation& ann,
                                    int first_knowledge_vertex, const EdgeVocab& vocab) {
  if (ann.doc_id != doc.doc_id)
    throw ValidationError("coreference_edges: annotation for " + ann.doc_id +
                          " applied to doc " + doc.doc_id);
  std::vector<Edge> out;
  for (const auto& chain : ann.chains) {
    std::set<int> segs;
    for (const auto& m : chain) {
      if (m.segment_index < 1 || m.segment_index > static_cast<int>(doc.segments.size()))
        throw ValidationError("doc " + doc.doc_id + ": mention segment " +
                              std::to_string(m.segment_index) + " out of range");
      const auto& seg = doc.segments[static_cast<size_t>(m.segment_index - 1)];
      if (m.start < 0 || m.end <= m.start || m.end > static_cast<int>(seg.text.size()))
        throw ValidationError("doc " + doc.doc_id + ": mention span [" +
                              std::to_string(m.start) + "," + std::to_string(m.end) +
                              ") out of segment " + std::to_string(m.segment_index) +
                              " bounds");
      segs.insert(m.segment_index);
    }
    for (auto it = segs.begin(); it != segs.end(); ++it) {
      for (auto jt = std::next(it); jt != segs.end(); ++jt) {
        int a = first_knowledge_vertex + *it - 1;
        int b = first_knowledge_vertex + *jt - 1;
        out.push_back({a, b, vocab.coreference_id()});
        out.push_back({b, a, vocab.coreference_id()});
      }
    }
  }
  return out;
}

std::vector<Edge> common_entity_edges(const corpus::Document& doc,
                                      const std::vector<std::set<std::string>>& entities,
                                      int first_knowledge_vertex, const EdgeVocab& vocab) {
  if (entities.size() != doc.segments.size())
    throw ValidationError("common_entity_edges: entity sets count mismatch for doc " +
                          doc.doc_id);
  std::vector<Edge> out;
  for (size_t i = 0; i < entities.size(); ++i) {
    for (size_t j = i + 1; j < entities.size(); ++j) {
      if (intersects(entities[i], entities[j])) {
        int a = first_knowledge_vertex + static_cast<int>(i);
        int b = first_knowledge_vertex + static_cast<int>(j);
        out.push_back({a, b, vocab.common_entity_id()});
        out.push_back({b, a, vocab.common_entity_id()});
      }
    }
  }
  return out;
}

std::vector<Edge> partial_order_edges(const corpus::Document& doc, int hop,
                                      int first_knowledge_vertex, const EdgeVocab& vocab) {
  if (hop < 1) throw ValidationError("partial_order_edges: hop must be >= 1");
  std::vector<Edge> out;
  const int n = static_cast<int>(doc.segments.size());
  for (int j = 1; j <= n; ++j) {
    for (int k = j + 1; k <= std::min(j + hop, n); ++k) {
      int a = first_knowledge_vertex + j - 1;
      int b = first_knowledge_vertex + k - 1;
      out.push_back({a, b, vocab.partial_order_id()});
      out.push_back({b, a, vocab.partial_order_id()});
    }
  }
  return out;
}

CorefMDG build_graph(const corpus::DialogSample& sample,
                     const corpus::Resources& resources,
                     const GraphVariantConfig& variant,
                     std::shared_ptr<const EdgeVocab> vocab) {
  variant.validate();
  CorefMDG g;
  g.sample_id = sample.sample_id;
  g.vocab = vocab;
  for (const auto& doc : sample.documents) {
    g.topic_doc_ids.push_back(doc.doc_id);
    for (const auto& seg : doc.segments) g.knowledge_refs.emplace_back(doc.doc_id, seg.index);
  }
  const int M = g.num_topics();

  std::vector<Edge> edges;
  for (int v = 0; v < g.num_vertices(); ++v)
    edges.push_back({v, v, vocab->self_loop_id()});

  int first_knl = M;
  for (size_t d = 0; d < sample.documents.size(); ++d) {
    const auto& doc = sample.documents[d];
    if (variant.topic_knowledge_edges) {
      auto e = topic_knowledge_edges(doc, static_cast<int>(d), first_knl, *vocab);
      edges.insert(edges.end(), e.begin(), e.end());
    }
    switch (variant.knowledge_mode) {
      case KnowledgeEdgeMode::coreference: {
        auto it = resources.coref.find(doc.doc_id);
        if (it != resources.coref.end()) {
          auto e = coreference_edges(doc, it->second, first_knl, *vocab);
          edges.insert(edges.end(), e.begin(), e.end());
        }
        break;
      }
      case KnowledgeEdgeMode::common_entity: {
        auto e = common_entity_edges(doc, corpus::fallback_entities(doc), first_knl, *vocab);
        edges.insert(edges.end(), e.begin(), e.end());
        break;
      }
      case KnowledgeEdgeMode::partial_order: {
        auto e = partial_order_edges(doc, variant.partial_order_hop, first_knl, *vocab);
        edges.insert(edges.end(), e.begin(), e.end());
        break;
      }
      case KnowledgeEdgeMode::none:
        break;
    }
    first_knl += static_cast<int>(doc.segments.size());
  }

  if (variant.topic_edges) {
    std::vector<std::string> phrases;
    for (const auto& doc : sample.documents) phrases.push_back(doc.topic);
    if (variant.word_overlap) {
      auto e = word_overlap_edges(phrases, resources.lemmas, *vocab);
      edges.insert(edges.end(), e.begin(), e.end());
    }
    if (variant.commonsense) {
      auto e = commonsense_edges(phrases, resources.relations, *vocab);
      edges.insert(edges.end(), e.begin(), e.end());
    }
  }

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

std::string stat_family(const std::string& type_name) {
  if (type_name == "self_loop") return "self_loop";
  if (type_name.rfind("sent_", 0) == 0) return "sent";
  if (type_name == "word_overlap") return "word_overlap";
  if (type_name == "coreference_link") return "coreference_link";
  if (type_name == "common_entity") return "common_entity";
  if (type_name == "partial_order") return "partial_order";
  return "commonsense";  // commonsense:<rel> and the others bucket
}

GraphStats graph_stats(const std::vector<CorefMDG>& graphs) {
  if (graphs.empty()) throw ValidationError("graph_stats: need at least one graph");
  GraphStats stats;
  stats.n_graphs = static_cast<int>(graphs.size());
  std::map<std::string, long> totals;
  static const char* kFamilies[] = {"sent",          "word_overlap",  "commonsense",
                                    "coreference_link", "common_entity", "partial_order",
                                    "self_loop"};
  for (const char* f : kFamilies) totals[f] = 0;

  for (const auto& g : graphs) {
    std::set<std::tuple<int, int, std::string>> undirected;
    for (const auto& e : g.edges) {
      const std::string fam = stat_family(g.vocab->type(e.type).name);
      undirected.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst), fam);
    }
    for (const auto& [a, b, fam] : undirected) ++totals[fam];
  }
  for (const auto& [fam, count] : totals)
    stats.avg_per_family[fam] = static_cast<double>(count) / stats.n_graphs;
  return stats;
}

void write_dot(const CorefMDG& g, const corpus::DialogSample& sample, std::ostream& out) {
  out << "digraph coref_mdg {\n";
  out << "  rankdir=LR;\n";
  for (int i = 0; i < g.num_topics(); ++i) {
    const corpus::Document* doc = sample.find_document(g.topic_doc_ids[static_cast<size_t>(i)]);
    out << "  v" << i << " [shape=box,label=\"" << (doc ? doc->topic : g.topic_doc_ids[static_cast<size_t>(i)])
        << "\"];\n";
  }
  for (int i = 0; i < g.num_knowledge(); ++i) {
    const auto& ref = g.knowledge_refs[static_cast<size_t>(i)];
    out << "  v" << (g.num_topics() + i) << " [shape=ellipse,label=\"" << ref.first << ":"
        << ref.second << "\"];\n";
  }
  for (const auto& e : g.edges) {
    if (e.src == e.dst) continue;  // self loops clutter the rendering
    out << "  v" << e.src << " -> v" << e.dst << " [label=\"" << g.vocab->type(e.type).name
        << "\"];\n";
  }
  out << "}\n";
}

std::string to_json(const CorefMDG& g) {
  nlohmann::ordered_json j;
  j["sample"] = g.sample_id;
  j["vocab"] = nlohmann::ordered_json::array();
  for (const auto& t : g.vocab->types()) j["vocab"].push_back(t.name);
  j["topics"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < g.topic_doc_ids.size(); ++i)
    j["topics"].push_back({{"vertex", i}, {"doc", g.topic_doc_ids[i]}});
  j["knowledge"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < g.knowledge_refs.size(); ++i)
    j["knowledge"].push_back({{"vertex", g.topic_doc_ids.size() + i},
                              {"doc", g.knowledge_refs[i].first},
                              {"sent", g.knowledge_refs[i].second}});
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges)
    j["edges"].push_back({{"src", e.src},
                          {"dst", e.dst},
                          {"type", e.type},
                          {"name", g.vocab->type(e.type).name}});
  return j.dump(2);
}

}  // namespace corefdiffs::graph
