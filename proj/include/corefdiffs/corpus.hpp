#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace corefdiffs::corpus {

// One sentence-level unit of a grounding document. `index` is 1-based and
// contiguous within the document.
struct KnowledgeSegment {
  std::string doc_id;
  int index = 0;
  std::string text;
};

struct Document {
  std::string doc_id;
  std::string topic;
  std::vector<KnowledgeSegment> segments;

  const KnowledgeSegment& segment(int index_1based) const;
};

enum class Role { user, agent };

struct GoldRef {
  std::string doc_id;
  int segment_index = 0;  // 1-based

  bool operator==(const GoldRef& o) const {
    return doc_id == o.doc_id && segment_index == o.segment_index;
  }
};

struct Turn {
  Role role = Role::user;
  std::string utterance;
  std::optional<GoldRef> gold;  // agent turns only
};

struct DialogSample {
  std::string sample_id;
  std::vector<Turn> turns;  // oldest first; final turn is a user turn
  std::vector<Document> documents;
  GoldRef gold;                          // label for the target turn r_t
  std::optional<std::string> response;   // reference response text, when known

  const Document* find_document(const std::string& doc_id) const;
  int document_index(const std::string& doc_id) const;  // -1 when absent
  // Gold labels of prior agent turns, oldest first.
  std::vector<GoldRef> labeled_history() const;
};

struct Mention {
  int segment_index = 0;  // 1-based
  int start = 0;          // char offsets within the segment text
  int end = 0;            // exclusive
};

struct CorefAnnotation {
  std::string doc_id;
  std::vector<std::vector<Mention>> chains;  // each chain has >= 2 mentions
};

using CorefAnnotations = std::map<std::string, CorefAnnotation>;  // by doc_id

class RelationTable {
 public:
  RelationTable() = default;
  RelationTable(std::map<std::pair<std::string, std::string>, std::string> entries,
                std::set<std::string> kept, std::string others_label = "others");

  // Relation name for the ordered pair, remapped to the others label when the
  // stored name is not among the kept high-frequency relations.
  std::optional<std::string> lookup(const std::string& topic_a,
                                    const std::string& topic_b) const;

  const std::set<std::string>& kept_relations() const { return kept_; }
  const std::string& others_label() const { return others_; }
  size_t size() const { return entries_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, std::string> entries_;
  std::set<std::string> kept_;
  std::string others_ = "others";
};

class LemmaTable {
 public:
  LemmaTable() = default;
  explicit LemmaTable(std::map<std::string, std::string> entries)
      : entries_(std::move(entries)) {}

  // Lowercase identity fallback for out-of-vocabulary tokens.
  std::string lemma(const std::string& token) const;

  size_t size() const { return entries_.size(); }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

struct Resources {
  RelationTable relations;
  LemmaTable lemmas;
  CorefAnnotations coref;
};

// ---- validation ----

// Throws ValidationError naming the sample and field on the first violation.
void validate_sample(const DialogSample& sample);

// Annotation doc ids must exist in the corpus and mentions must fit the
// segment bounds.
void validate_annotations(const std::vector<DialogSample>& corpus,
                          const CorefAnnotations& anns);

// ---- ingestion ----

enum class Schema { canonical, holle };

struct HolleOptions {
  // Splits each movie's knowledge into four pseudo-topic documents
  // (plots/comments/reviews/table). When off, one document per movie.
  bool four_topic_split = true;
};

std::vector<DialogSample> load_corpus(const std::string& path,
                                      Schema schema = Schema::canonical,
                                      const HolleOptions& holle = {});
void save_corpus(const std::vector<DialogSample>& corpus, const std::string& path);

CorefAnnotations load_coref_annotations(const std::string& path);
void save_coref_annotations(const CorefAnnotations& anns, const std::string& path);

struct RawRelation {
  std::string topic_a, topic_b, relation;
};

std::vector<RawRelation> load_raw_relations(const std::string& path);  // TSV
void save_raw_relations(const std::vector<RawRelation>& rels, const std::string& path);

RelationTable build_relation_table(const std::vector<RawRelation>& raw,
                                   size_t keep_top,
                                   const std::string& others_label = "others");

LemmaTable load_lemma_table(const std::string& path);  // TSV
void save_lemma_table(const LemmaTable& table, const std::string& path);

// ---- derived labels / fallback annotators ----

// Segment with maximal unigram F1 against the response; ties broken by
// (document order, segment index).
GoldRef induce_pseudo_gold(const DialogSample& sample, const std::string& response);

// Deterministic stand-in for an external resolver: links segments of a
// document that repeat the same capitalized (non-stopword) token run.
CorefAnnotation fallback_coref_annotation(const Document& doc);
CorefAnnotations fallback_coref_annotations(const std::vector<DialogSample>& corpus);

// Per-segment entity sets from capitalized runs; used by common_entity edges
// when no entity annotation is supplied.
std::vector<std::set<std::string>> fallback_entities(const Document& doc);

// ---- synthetic corpora ----

enum class SynthFlavor {
  generic,             // gold is cued lexically by the final user turn
  coref_discriminative // gold is identifiable only via a coreference chain
                       // from the previous agent turn's gold segment
};

struct SynthSpec {
  int n_samples = 64;
  int max_docs = 5;      // <= 5 by default
  int max_segments = 6;  // <= 6 by default
  SynthFlavor flavor = SynthFlavor::generic;
};

struct SynthBundle {
  std::vector<DialogSample> corpus;
  CorefAnnotations annotations;
  std::vector<RawRelation> raw_relations;
  RelationTable relations;  // built with the generator's keep_top
  LemmaTable lemmas;
};

SynthBundle generate_synthetic_corpus(uint64_t seed, const SynthSpec& spec);

}  // namespace corefdiffs::corpus
