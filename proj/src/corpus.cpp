#include "corefdiffs/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "corefdiffs/errors.hpp"
#include "corefdiffs/metrics.hpp"
#include "corefdiffs/rng.hpp"
#include "corefdiffs/text.hpp"

namespace corefdiffs::corpus {

using nlohmann::json;
using nlohmann::ordered_json;

const KnowledgeSegment& Document::segment(int index_1based) const {
  if (index_1based < 1 || index_1based > static_cast<int>(segments.size())) {
    throw ValidationError("document " + doc_id + ": segment index " +
                          std::to_string(index_1based) + " out of range 1.." +
                          std::to_string(segments.size()));
  }
  return segments[static_cast<size_t>(index_1based - 1)];
}

const Document* DialogSample::find_document(const std::string& doc_id) const {
  for (const auto& d : documents)
    if (d.doc_id == doc_id) return &d;
  return nullptr;
}

int DialogSample::document_index(const std::string& doc_id) const {
  for (size_t i = 0; i < documents.size(); ++i)
    if (documents[i].doc_id == doc_id) return static_cast<int>(i);
  return -1;
}

std::vector<GoldRef> DialogSample::labeled_history() const {
  std::vector<GoldRef> out;
  for (const auto& t : turns)
    if (t.role == Role::agent && t.gold) out.push_back(*t.gold);
  return out;
}

RelationTable::RelationTable(
    std::map<std::pair<std::string, std::string>, std::string> entries,
    std::set<std::string> kept, std::string others_label)
    : entries_(std::move(entries)), kept_(std::move(kept)), others_(std::move(others_label)) {}

std::optional<std::string> RelationTable::lookup(const std::string& topic_a,
                                                 const std::string& topic_b) const {
  auto it = entries_.find({topic_a, topic_b});
  if (it == entries_.end()) return std::nullopt;
  if (kept_.count(it->second)) return it->second;
  return others_;
}

std::string LemmaTable::lemma(const std::string& token) const {
  auto it = entries_.find(token);
  if (it != entries_.end()) return it->second;
  return text::lower(token);
}

// ---- validation ----

void validate_sample(const DialogSample& sample) {
  const std::string ctx = "sample " + sample.sample_id;
  if (sample.turns.empty()) throw ValidationError(ctx + ": no turns");
  if (sample.turns.back().role != Role::user)
    throw ValidationError(ctx + ": final turn must have role user");
  if (sample.documents.empty()) throw ValidationError(ctx + ": no documents");

  std::set<std::string> ids;
  for (const auto& doc : sample.documents) {
    if (!ids.insert(doc.doc_id).second)
      throw ValidationError(ctx + ": duplicate doc id " + doc.doc_id);
    if (text::trim(doc.topic).empty())
      throw ValidationError(ctx + ", doc " + doc.doc_id + ": empty topic phrase");
    if (doc.segments.empty())
      throw ValidationError(ctx + ", doc " + doc.doc_id + ": no segments");
    for (size_t j = 0; j < doc.segments.size(); ++j) {
      const auto& seg = doc.segments[j];
      if (seg.doc_id != doc.doc_id)
        throw ValidationError(ctx + ", doc " + doc.doc_id + ": segment carries doc id " +
                              seg.doc_id);
      if (seg.index != static_cast<int>(j) + 1)
        throw ValidationError(ctx + ", doc " + doc.doc_id + ": segment indices must be " +
                              "contiguous from 1, found " + std::to_string(seg.index) +
                              " at position " + std::to_string(j + 1));
      if (text::trim(seg.text).empty())
        throw ValidationError(ctx + ", doc " + doc.doc_id + ": segment " +
                              std::to_string(seg.index) + " empty after trimming");
    }
  }

  auto check_ref = [&](const GoldRef& ref, const std::string& where) {
    const Document* doc = sample.find_document(ref.doc_id);
    if (!doc)
      throw ValidationError(ctx + ", " + where + ": gold references unknown doc " +
                            ref.doc_id);
    if (ref.segment_index < 1 || ref.segment_index > static_cast<int>(doc->segments.size()))
      throw ValidationError(ctx + ", " + where + ": gold references " + ref.doc_id +
                            " segment " + std::to_string(ref.segment_index) +
                            " outside 1.." + std::to_string(doc->segments.size()));
  };

  for (size_t i = 0; i < sample.turns.size(); ++i) {
    const auto& t = sample.turns[i];
    if (t.gold) {
      if (t.role != Role::agent)
        throw ValidationError(ctx + ": turn " + std::to_string(i + 1) +
                              " is a user turn but carries a gold label");
      check_ref(*t.gold, "turn " + std::to_string(i + 1));
    }
  }
  check_ref(sample.gold, "target gold");
}

void validate_annotations(const std::vector<DialogSample>& corpus,
                          const CorefAnnotations& anns) {
  std::map<std::string, const Document*> docs;
  for (const auto& s : corpus)
    for (const auto& d : s.documents) docs.emplace(d.doc_id, &d);

  for (const auto& [doc_id, ann] : anns) {
    auto it = docs.find(doc_id);
    if (it == docs.end())
      throw ValidationError("coref annotation references unknown doc " + doc_id);
    const Document& doc = *it->second;
    for (size_t c = 0; c < ann.chains.size(); ++c) {
      const auto& chain = ann.chains[c];
      if (chain.size() < 2)
        throw ValidationError("doc " + doc_id + ": chain " + std::to_string(c + 1) +
                              " has fewer than 2 mentions");
      for (const auto& m : chain) {
        if (m.segment_index < 1 || m.segment_index > static_cast<int>(doc.segments.size()))
          throw ValidationError("doc " + doc_id + ": mention segment " +
                                std::to_string(m.segment_index) + " out of range");
        const auto& seg = doc.segments[static_cast<size_t>(m.segment_index - 1)];
        if (m.start < 0 || m.end <= m.start ||
            m.end > static_cast<int>(seg.text.size()))
          throw ValidationError("doc " + doc_id + ": mention span [" +
                                std::to_string(m.start) + "," + std::to_string(m.end) +
                                ") outside segment " + std::to_string(m.segment_index));
      }
    }
  }
}

// ---- JSON ingestion ----

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return j;
}

const json& require(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key))
    throw ValidationError(ctx + ": missing field '" + key + "'");
  return j.at(key);
}

GoldRef parse_gold(const json& j, const std::string& ctx) {
  GoldRef g;
  g.doc_id = require(j, "doc", ctx).get<std::string>();
  g.segment_index = require(j, "sent", ctx).get<int>();
  return g;
}

Role parse_role(const std::string& s, const std::string& ctx) {
  if (s == "user") return Role::user;
  if (s == "agent") return Role::agent;
  throw ValidationError(ctx + ": role must be 'user' or 'agent', got '" + s + "'");
}

DialogSample parse_canonical_sample(const json& js) {
  DialogSample s;
  s.sample_id = require(js, "id", "sample").get<std::string>();
  const std::string ctx = "sample " + s.sample_id;

  for (const auto& jd : require(js, "docs", ctx)) {
    Document d;
    d.doc_id = require(jd, "id", ctx + " doc").get<std::string>();
    d.topic = require(jd, "topic", ctx + " doc " + d.doc_id).get<std::string>();
    int idx = 1;
    for (const auto& st : require(jd, "sents", ctx + " doc " + d.doc_id)) {
      d.segments.push_back({d.doc_id, idx++, st.get<std::string>()});
    }
    s.documents.push_back(std::move(d));
  }
  for (const auto& jt : require(js, "turns", ctx)) {
    Turn t;
    t.role = parse_role(require(jt, "role", ctx + " turn").get<std::string>(), ctx);
    t.utterance = require(jt, "text", ctx + " turn").get<std::string>();
    if (jt.contains("gold") && !jt.at("gold").is_null())
      t.gold = parse_gold(jt.at("gold"), ctx + " turn gold");
    s.turns.push_back(std::move(t));
  }
  s.gold = parse_gold(require(js, "gold", ctx), ctx + " gold");
  if (js.contains("response") && !js.at("response").is_null())
    s.response = js.at("response").get<std::string>();
  return s;
}

const std::vector<std::string> kHolleCategories = {"plots", "comments", "reviews", "table"};

DialogSample parse_holle_sample(const json& js, const HolleOptions& opt) {
  DialogSample s;
  s.sample_id = require(js, "id", "sample").get<std::string>();
  const std::string ctx = "sample " + s.sample_id;
  const json& movie = require(js, "movie", ctx);
  const std::string title = require(movie, "title", ctx).get<std::string>();

  // Category -> (doc id, local 1-based offset) for gold remapping.
  std::map<std::string, std::pair<std::string, int>> where;
  if (opt.four_topic_split) {
    for (const auto& cat : kHolleCategories) {
      if (!movie.contains(cat)) continue;
      const auto& sents = movie.at(cat);
      if (sents.empty()) continue;
      Document d;
      d.doc_id = title + "#" + cat;
      d.topic = title + " " + cat;
      int idx = 1;
      for (const auto& st : sents) d.segments.push_back({d.doc_id, idx++, st.get<std::string>()});
      where[cat] = {d.doc_id, 0};
      s.documents.push_back(std::move(d));
    }
  } else {
    Document d;
    d.doc_id = title;
    d.topic = title;
    int idx = 1;
    for (const auto& cat : kHolleCategories) {
      if (!movie.contains(cat)) continue;
      where[cat] = {d.doc_id, idx - 1};
      for (const auto& st : movie.at(cat)) d.segments.push_back({d.doc_id, idx++, st.get<std::string>()});
    }
    s.documents.push_back(std::move(d));
  }

  auto remap = [&](const json& jg, const std::string& wctx) -> GoldRef {
    std::string cat = require(jg, "category", wctx).get<std::string>();
    int sent = require(jg, "sent", wctx).get<int>();
    auto it = where.find(cat);
    if (it == where.end())
      throw ValidationError(wctx + ": gold references empty or unknown category '" + cat + "'");
    return {it->second.first, it->second.second + sent};
  };

  for (const auto& jt : require(js, "turns", ctx)) {
    Turn t;
    t.role = parse_role(require(jt, "role", ctx + " turn").get<std::string>(), ctx);
    t.utterance = require(jt, "text", ctx + " turn").get<std::string>();
    if (jt.contains("gold") && !jt.at("gold").is_null())
      t.gold = remap(jt.at("gold"), ctx + " turn gold");
    s.turns.push_back(std::move(t));
  }
  s.gold = remap(require(js, "gold", ctx), ctx + " gold");
  if (js.contains("response") && !js.at("response").is_null())
    s.response = js.at("response").get<std::string>();
  return s;
}

}  // namespace

std::vector<DialogSample> load_corpus(const std::string& path, Schema schema,
                                      const HolleOptions& holle) {
  json j = parse_file(path);
  std::vector<DialogSample> out;
  for (const auto& js : require(j, "samples", path)) {
    DialogSample s = schema == Schema::canonical ? parse_canonical_sample(js)
                                                 : parse_holle_sample(js, holle);
    validate_sample(s);
    out.push_back(std::move(s));
  }
  return out;
}

void save_corpus(const std::vector<DialogSample>& corpus, const std::string& path) {
  ordered_json j;
  j["samples"] = ordered_json::array();
  for (const auto& s : corpus) {
    ordered_json js;
    js["id"] = s.sample_id;
    js["turns"] = ordered_json::array();
    for (const auto& t : s.turns) {
      ordered_json jt;
      jt["role"] = t.role == Role::user ? "user" : "agent";
      jt["text"] = t.utterance;
      if (t.gold) jt["gold"] = {{"doc", t.gold->doc_id}, {"sent", t.gold->segment_index}};
      js["turns"].push_back(std::move(jt));
    }
    js["docs"] = ordered_json::array();
    for (const auto& d : s.documents) {
      ordered_json jd;
      jd["id"] = d.doc_id;
      jd["topic"] = d.topic;
      jd["sents"] = ordered_json::array();
      for (const auto& seg : d.segments) jd["sents"].push_back(seg.text);
      js["docs"].push_back(std::move(jd));
    }
    js["gold"] = {{"doc", s.gold.doc_id}, {"sent", s.gold.segment_index}};
    if (s.response) js["response"] = *s.response;
    j["samples"].push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << j.dump(2) << "\n";
}

CorefAnnotations load_coref_annotations(const std::string& path) {
  json j = parse_file(path);
  CorefAnnotations out;
  auto parse_one = [&](const json& ja) {
    CorefAnnotation ann;
    ann.doc_id = require(ja, "doc", path).get<std::string>();
    for (const auto& jc : require(ja, "chains", "doc " + ann.doc_id)) {
      std::vector<Mention> chain;
      for (const auto& jm : jc) {
        Mention m;
        m.segment_index = require(jm, "sent", "doc " + ann.doc_id).get<int>();
        m.start = require(jm, "start", "doc " + ann.doc_id).get<int>();
        m.end = require(jm, "end", "doc " + ann.doc_id).get<int>();
        chain.push_back(m);
      }
      if (chain.size() < 2)
        throw ValidationError("doc " + ann.doc_id + ": chain with fewer than 2 mentions");
      ann.chains.push_back(std::move(chain));
    }
    out[ann.doc_id] = std::move(ann);
  };
  if (j.is_array()) {
    for (const auto& ja : j) parse_one(ja);
  } else {
    parse_one(j);
  }
  return out;
}

void save_coref_annotations(const CorefAnnotations& anns, const std::string& path) {
  ordered_json j = ordered_json::array();
  for (const auto& [doc_id, ann] : anns) {
    ordered_json ja;
    ja["doc"] = doc_id;
    ja["chains"] = ordered_json::array();
    for (const auto& chain : ann.chains) {
      ordered_json jc = ordered_json::array();
      for (const auto& m : chain)
        jc.push_back({{"sent", m.segment_index}, {"start", m.start}, {"end", m.end}});
      ja["chains"].push_back(std::move(jc));
    }
    j.push_back(std::move(ja));
  }
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::vector<RawRelation> load_raw_relations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open " + path);
  std::vector<RawRelation> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    RawRelation r;
    if (!std::getline(ss, r.topic_a, '\t') || !std::getline(ss, r.topic_b, '\t') ||
        !std::getline(ss, r.relation, '\t')) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected topic_a<TAB>topic_b<TAB>relation");
    }
    out.push_back(std::move(r));
  }
  return out;
}

void save_raw_relations(const std::vector<RawRelation>& rels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  for (const auto& r : rels)
    out << r.topic_a << '\t' << r.topic_b << '\t' << r.relation << '\n';
}

RelationTable build_relation_table(const std::vector<RawRelation>& raw, size_t keep_top,
                                   const std::string& others_label) {
  std::map<std::string, long> freq;
  for (const auto& r : raw) ++freq[r.relation];

  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::set<std::string> kept;
  for (size_t i = 0; i < ranked.size() && i < keep_top; ++i) kept.insert(ranked[i].first);

  std::map<std::pair<std::string, std::string>, std::string> entries;
  for (const auto& r : raw) entries.emplace(std::make_pair(r.topic_a, r.topic_b), r.relation);

  return RelationTable(std::move(entries), std::move(kept), others_label);
}

LemmaTable load_lemma_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open " + path);
  std::map<std::string, std::string> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok, lem;
    if (!std::getline(ss, tok, '\t') || !std::getline(ss, lem, '\t')) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected token<TAB>lemma");
    }
    lem = text::lower(text::trim(lem));
    if (lem.empty())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": empty lemma");
    entries[tok] = lem;
  }
  return LemmaTable(std::move(entries));
}

void save_lemma_table(const LemmaTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  for (const auto& [tok, lem] : table.entries()) out << tok << '\t' << lem << '\n';
}

GoldRef induce_pseudo_gold(const DialogSample& sample, const std::string& response) {
  if (text::trim(response).empty())
    throw ValidationError("induce_pseudo_gold: empty response for sample " + sample.sample_id);
  bool any = false;
  GoldRef best;
  double best_score = -1.0;
  for (const auto& doc : sample.documents) {
    for (const auto& seg : doc.segments) {
      any = true;
      double score = eval::unigram_f1(seg.text, response);
      if (score > best_score) {
        best_score = score;
        best = {doc.doc_id, seg.index};
      }
    }
  }
  if (!any)
    throw ValidationError("induce_pseudo_gold: sample " + sample.sample_id + " has no segments");
  return best;
}

CorefAnnotation fallback_coref_annotation(const Document& doc) {
  // run text -> mentions, runs sorted lexicographically for determinism
  std::map<std::string, std::vector<Mention>> runs;
  for (const auto& seg : doc.segments) {
    for (const auto& run : text::capitalized_runs(seg.text)) {
      auto toks = text::tokenize_keep_case(run);
      if (toks.size() == 1 && text::is_capitalized_stopword(toks[0])) continue;
      size_t pos = 0;
      while ((pos = seg.text.find(run, pos)) != std::string::npos) {
        runs[run].push_back({seg.index, static_cast<int>(pos),
                             static_cast<int>(pos + run.size())});
        pos += run.size();
      }
    }
  }
  CorefAnnotation ann;
  ann.doc_id = doc.doc_id;
  for (const auto& [run, mentions] : runs) {
    std::set<int> segs;
    for (const auto& m : mentions) segs.insert(m.segment_index);
    if (segs.size() >= 2) ann.chains.push_back(mentions);
  }
  return ann;
}

CorefAnnotations fallback_coref_annotations(const std::vector<DialogSample>& corpus) {
  CorefAnnotations out;
  for (const auto& s : corpus) {
    for (const auto& d : s.documents) {
      if (out.count(d.doc_id)) continue;
      CorefAnnotation ann = fallback_coref_annotation(d);
      if (!ann.chains.empty()) out[d.doc_id] = std::move(ann);
    }
  }
  return out;
}

std::vector<std::set<std::string>> fallback_entities(const Document& doc) {
  std::vector<std::set<std::string>> out;
  out.reserve(doc.segments.size());
  for (const auto& seg : doc.segments) {
    std::set<std::string> ents;
    for (const auto& run : text::capitalized_runs(seg.text)) ents.insert(run);
    out.push_back(std::move(ents));
  }
  return out;
}

// ---- synthetic corpora ----

namespace {

std::string word(const char* prefix, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%03zu", prefix, i);
  return buf;
}

std::vector<std::string> sample_words(Rng& rng, const char* prefix, size_t pool,
                                      size_t count) {
  std::vector<std::string> out;
  std::set<size_t> used;
  while (out.size() < count) {
    size_t i = rng.index(pool);
    if (used.insert(i).second || used.size() >= pool) out.push_back(word(prefix, i));
  }
  return out;
}

struct GenState {
  SynthBundle bundle;
  std::map<std::string, std::string> lemma_entries;
};

void generate_generic_sample(Rng& rng, const SynthSpec& spec, size_t k, GenState& st) {
  DialogSample s;
  s.sample_id = "g" + std::to_string(k);

  const int n_docs = 1 + static_cast<int>(rng.index(static_cast<size_t>(spec.max_docs)));
  std::vector<std::vector<std::string>> topic_words(static_cast<size_t>(n_docs));
  for (int d = 0; d < n_docs; ++d) {
    Document doc;
    doc.doc_id = s.sample_id + "_d" + std::to_string(d);
    // Topic pool is small so phrases collide across documents, which yields
    // word_overlap edges. A plural surface form exercises the lemma table.
    auto tw = sample_words(rng, "tp", 24, 2);
    topic_words[static_cast<size_t>(d)] = tw;
    std::string t0 = tw[0], t1 = tw[1];
    if (rng.chance(0.25)) {
      st.lemma_entries[t1 + "s"] = t1;
      t1 += "s";
    }
    doc.topic = t0 + " " + t1;

    const int n_segs = 1 + static_cast<int>(rng.index(static_cast<size_t>(spec.max_segments)));
    for (int j = 1; j <= n_segs; ++j) {
      auto ws = sample_words(rng, "w", 400, 5);
      doc.segments.push_back({doc.doc_id, j, text::join(ws, " ")});
    }
    // Entity shared by two segments; the generator emits the chain itself.
    if (n_segs >= 2 && rng.chance(0.5)) {
      std::string ent = "Ent" + std::to_string(rng.index(20));
      size_t a = rng.index(static_cast<size_t>(n_segs));
      size_t b = rng.index(static_cast<size_t>(n_segs));
      while (b == a) b = rng.index(static_cast<size_t>(n_segs));
      CorefAnnotation& ann = st.bundle.annotations[doc.doc_id];
      ann.doc_id = doc.doc_id;
      std::vector<Mention> chain;
      for (size_t seg_pos : {a, b}) {
        auto& seg = doc.segments[seg_pos];
        int start = static_cast<int>(seg.text.size()) + 1;
        seg.text += " " + ent;
        chain.push_back({seg.index, start, start + static_cast<int>(ent.size())});
      }
      ann.chains.push_back(std::move(chain));
    }
    s.documents.push_back(std::move(doc));
  }

  auto random_gold = [&]() -> GoldRef {
    const auto& doc = s.documents[rng.index(s.documents.size())];
    return {doc.doc_id, 1 + static_cast<int>(rng.index(doc.segments.size()))};
  };

  s.gold = random_gold();
  const int shape = static_cast<int>(rng.index(3));  // 0: 1 turn, 1: 3 turns, 2: 5 turns
  const int n_prior = shape;                         // labeled agent turns

  std::vector<GoldRef> priors;
  for (int i = 0; i < n_prior; ++i) {
    if (rng.chance(0.6)) {
      // intra-topic: stay on the final gold's document
      const Document* doc = s.find_document(s.gold.doc_id);
      priors.push_back({doc->doc_id, 1 + static_cast<int>(rng.index(doc->segments.size()))});
    } else {
      priors.push_back(random_gold());
    }
  }

  auto quote = [&](const GoldRef& g, size_t n_words) {
    const auto& seg = s.find_document(g.doc_id)->segment(g.segment_index);
    auto toks = text::tokenize(seg.text);
    if (toks.size() > n_words) toks.resize(n_words);
    return text::join(toks, " ");
  };
  auto filler = [&]() { return word("f", rng.index(30)); };

  for (int i = 0; i < n_prior; ++i) {
    s.turns.push_back({Role::user, "so what about " + filler(), std::nullopt});
    s.turns.push_back({Role::agent, "well " + quote(priors[static_cast<size_t>(i)], 3), priors[static_cast<size_t>(i)]});
  }
  // Final user turn cues the gold segment and its topic.
  const Document* gold_doc = s.find_document(s.gold.doc_id);
  s.turns.push_back({Role::user,
                     "tell me about " + quote(s.gold, 3) + " " +
                         topic_words[static_cast<size_t>(s.document_index(s.gold.doc_id))][0],
                     std::nullopt});
  s.response = gold_doc->segment(s.gold.segment_index).text;

  // Commonsense relations between co-occurring topics, with skewed frequency.
  static const char* kRels[] = {"subclass of", "sport", "capital of", "genre",
                                "rare relation a", "rare relation b"};
  if (s.documents.size() >= 2 && rng.chance(0.5)) {
    size_t a = rng.index(s.documents.size());
    size_t b = rng.index(s.documents.size());
    while (b == a) b = rng.index(s.documents.size());
    size_t r = rng.index(10);
    const char* rel = kRels[r < 4 ? 0 : (r < 7 ? 1 : (r < 8 ? 2 : (r < 9 ? 4 : 5)))];
    st.bundle.raw_relations.push_back({s.documents[a].topic, s.documents[b].topic, rel});
  }

  st.bundle.corpus.push_back(std::move(s));
}

void generate_coref_sample(Rng& rng, const SynthSpec& spec, size_t k, GenState& st) {
  DialogSample s;
  s.sample_id = "c" + std::to_string(k);

  const int min_docs = spec.max_docs >= 2 ? 2 : 1;
  const int n_docs =
      min_docs + static_cast<int>(rng.index(static_cast<size_t>(spec.max_docs - min_docs + 1)));
  const int min_segs = std::min(4, spec.max_segments);

  for (int d = 0; d < n_docs; ++d) {
    Document doc;
    doc.doc_id = s.sample_id + "_d" + std::to_string(d);
    doc.topic = word("ct", rng.index(40)) + " " + word("ct", rng.index(40));
    const int n_segs = min_segs + static_cast<int>(rng.index(
                                       static_cast<size_t>(spec.max_segments - min_segs + 1)));
    for (int j = 1; j <= n_segs; ++j) {
      auto ws = sample_words(rng, "w", 400, 5);
      doc.segments.push_back({doc.doc_id, j, text::join(ws, " ")});
    }
    s.documents.push_back(std::move(doc));
  }

  const size_t gd = rng.index(s.documents.size());
  Document& gold_doc = s.documents[gd];
  const size_t n_segs = gold_doc.segments.size();
  size_t prev_pos = rng.index(n_segs);
  size_t gold_pos = rng.index(n_segs);
  while (gold_pos == prev_pos) gold_pos = rng.index(n_segs);

  auto first_word_mention = [](const KnowledgeSegment& seg) -> Mention {
    auto toks = text::tokenize_keep_case(seg.text);
    int len = toks.empty() ? 1 : static_cast<int>(toks[0].size());
    return {seg.index, 0, len};
  };

  // The discriminative chain: previous gold <-> current gold, and nothing
  // else may share a chain with the previous gold segment.
  for (size_t d = 0; d < s.documents.size(); ++d) {
    Document& doc = s.documents[d];
    CorefAnnotation ann;
    ann.doc_id = doc.doc_id;
    if (d == gd) {
      ann.chains.push_back({first_word_mention(doc.segments[prev_pos]),
                            first_word_mention(doc.segments[gold_pos])});
      // decoy chains among the remaining segments
      std::vector<size_t> rest;
      for (size_t j = 0; j < doc.segments.size(); ++j)
        if (j != prev_pos && j != gold_pos) rest.push_back(j);
      if (rest.size() >= 2 && rng.chance(0.7)) {
        size_t a = rng.index(rest.size());
        size_t b = rng.index(rest.size());
        while (b == a) b = rng.index(rest.size());
        ann.chains.push_back({first_word_mention(doc.segments[rest[a]]),
                              first_word_mention(doc.segments[rest[b]])});
      }
    } else if (doc.segments.size() >= 2) {
      size_t a = rng.index(doc.segments.size());
      size_t b = rng.index(doc.segments.size());
      while (b == a) b = rng.index(doc.segments.size());
      ann.chains.push_back({first_word_mention(doc.segments[a]),
                            first_word_mention(doc.segments[b])});
    }
    if (!ann.chains.empty()) st.bundle.annotations[doc.doc_id] = std::move(ann);
  }

  GoldRef prev{gold_doc.doc_id, static_cast<int>(prev_pos) + 1};
  s.gold = {gold_doc.doc_id, static_cast<int>(gold_pos) + 1};

  auto filler = [&]() { return word("f", rng.index(30)); };
  s.turns.push_back({Role::user, "hello there " + filler(), std::nullopt});
  // The agent quotes its segment verbatim; the final user turn is content-free,
  // so only the chain identifies the next segment.
  s.turns.push_back({Role::agent, gold_doc.segments[prev_pos].text, prev});
  s.turns.push_back({Role::user, "interesting please tell me more", std::nullopt});
  s.response = gold_doc.segments[gold_pos].text;

  st.bundle.corpus.push_back(std::move(s));
}

}  // namespace

SynthBundle generate_synthetic_corpus(uint64_t seed, const SynthSpec& spec) {
  if (spec.n_samples <= 0 || spec.max_docs <= 0 || spec.max_segments <= 0)
    throw ValidationError("generate_synthetic_corpus: size parameters must be positive");

  Rng rng(seed);
  GenState st;
  for (size_t k = 0; k < static_cast<size_t>(spec.n_samples); ++k) {
    if (spec.flavor == SynthFlavor::generic) {
      generate_generic_sample(rng, spec, k, st);
    } else {
      generate_coref_sample(rng, spec, k, st);
    }
  }
  st.bundle.relations = build_relation_table(st.bundle.raw_relations, 3);
  st.bundle.lemmas = LemmaTable(st.lemma_entries);
  for (const auto& s : st.bundle.corpus) validate_sample(s);
  validate_annotations(st.bundle.corpus, st.bundle.annotations);
  return st.bundle;
}

}  // namespace corefdiffs::corpus
