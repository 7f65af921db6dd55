#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "corefdiffs/corpus.hpp"
#include "corefdiffs/errors.hpp"
#include "corefdiffs/text.hpp"
#include "test_util.hpp"

using namespace corefdiffs;
using namespace corefdiffs::corpus;
using testutil::TempDir;
using testutil::fixture;

TEST_CASE("load minimal one-dialog corpus") {
  TempDir tmp;
  testutil::write_file(tmp.file("c.json"), R"({
    "samples": [{
      "id": "m1",
      "turns": [{"role": "user", "text": "hi"}],
      "docs": [{"id": "d1", "topic": "blue", "sents": ["blue is a color"]}],
      "gold": {"doc": "d1", "sent": 1}
    }]
  })");
  auto samples = load_corpus(tmp.file("c.json"));
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].documents.size() == 1);
  CHECK(samples[0].turns.size() == 1);
  CHECK(samples[0].gold.doc_id == "d1");
}

TEST_CASE("dangling gold reference names the reference") {
  TempDir tmp;
  testutil::write_file(tmp.file("c.json"), R"({
    "samples": [{
      "id": "m1",
      "turns": [{"role": "user", "text": "hi"}],
      "docs": [{"id": "d1", "topic": "blue", "sents": ["blue is a color"]}],
      "gold": {"doc": "d1", "sent": 7}
    }]
  })");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_corpus(tmp.file("c.json"))),
                       doctest::Contains("segment 7"), ValidationError);
}

TEST_CASE("schema violations name the sample and field") {
  TempDir tmp;
  testutil::write_file(tmp.file("c.json"), R"({
    "samples": [{
      "id": "m2",
      "turns": [{"role": "user", "text": "hi"}],
      "docs": [{"id": "d1", "topic": "blue"}],
      "gold": {"doc": "d1", "sent": 1}
    }]
  })");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_corpus(tmp.file("c.json"))),
                       doctest::Contains("sents"), ValidationError);

  testutil::write_file(tmp.file("c2.json"), R"({
    "samples": [{
      "id": "m3",
      "turns": [{"role": "user", "text": "hi", "gold": {"doc": "d1", "sent": 1}}],
      "docs": [{"id": "d1", "topic": "blue", "sents": ["x"]}],
      "gold": {"doc": "d1", "sent": 1}
    }]
  })");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_corpus(tmp.file("c2.json"))),
                       doctest::Contains("user turn"), ValidationError);

  testutil::write_file(tmp.file("c3.json"), R"({
    "samples": [{
      "id": "m4",
      "turns": [{"role": "user", "text": "hi"}, {"role": "agent", "text": "yo"}],
      "docs": [{"id": "d1", "topic": "blue", "sents": ["x"]}],
      "gold": {"doc": "d1", "sent": 1}
    }]
  })");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_corpus(tmp.file("c3.json"))),
                       doctest::Contains("final turn"), ValidationError);
}

TEST_CASE("mini corpus fixture matches its hand-counted manifest") {
  auto samples = load_corpus(fixture("mini_corpus.json"));
  REQUIRE(samples.size() == 4);

  // hand counts: (M, N) per sample
  const std::vector<std::pair<int, int>> expected = {{2, 9}, {2, 5}, {1, 6}, {2, 8}};
  std::set<std::string> doc_ids;
  for (size_t i = 0; i < samples.size(); ++i) {
    int n = 0;
    for (const auto& d : samples[i].documents) {
      n += static_cast<int>(d.segments.size());
      doc_ids.insert(d.doc_id);
    }
    CHECK(static_cast<int>(samples[i].documents.size()) == expected[i].first);
    CHECK(n == expected[i].second);
  }
  CHECK(doc_ids.size() == 6);

  auto anns = load_coref_annotations(fixture("mini_coref.json"));
  validate_annotations(samples, anns);
  CHECK(anns.size() == 3);
  CHECK(anns.at("d_seattle").chains.size() == 3);
}

TEST_CASE("save/load round-trip is identity on the in-memory model") {
  auto samples = load_corpus(fixture("mini_corpus.json"));
  TempDir tmp;
  save_corpus(samples, tmp.file("rt.json"));
  auto again = load_corpus(tmp.file("rt.json"));
  REQUIRE(again.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(again[i].sample_id == samples[i].sample_id);
    CHECK(again[i].gold == samples[i].gold);
    CHECK(again[i].response == samples[i].response);
    REQUIRE(again[i].turns.size() == samples[i].turns.size());
    for (size_t t = 0; t < samples[i].turns.size(); ++t) {
      CHECK(again[i].turns[t].role == samples[i].turns[t].role);
      CHECK(again[i].turns[t].utterance == samples[i].turns[t].utterance);
      CHECK(again[i].turns[t].gold == samples[i].turns[t].gold);
    }
    REQUIRE(again[i].documents.size() == samples[i].documents.size());
    for (size_t d = 0; d < samples[i].documents.size(); ++d) {
      CHECK(again[i].documents[d].doc_id == samples[i].documents[d].doc_id);
      CHECK(again[i].documents[d].topic == samples[i].documents[d].topic);
      REQUIRE(again[i].documents[d].segments.size() == samples[i].documents[d].segments.size());
      for (size_t k = 0; k < samples[i].documents[d].segments.size(); ++k)
        CHECK(again[i].documents[d].segments[k].text == samples[i].documents[d].segments[k].text);
    }
  }
}

TEST_CASE("coref annotation round-trip") {
  auto anns = load_coref_annotations(fixture("mini_coref.json"));
  TempDir tmp;
  save_coref_annotations(anns, tmp.file("a.json"));
  auto again = load_coref_annotations(tmp.file("a.json"));
  REQUIRE(again.size() == anns.size());
  for (const auto& [doc, ann] : anns) {
    REQUIRE(again.count(doc));
    REQUIRE(again.at(doc).chains.size() == ann.chains.size());
    for (size_t c = 0; c < ann.chains.size(); ++c) {
      REQUIRE(again.at(doc).chains[c].size() == ann.chains[c].size());
      for (size_t m = 0; m < ann.chains[c].size(); ++m) {
        CHECK(again.at(doc).chains[c][m].segment_index == ann.chains[c][m].segment_index);
        CHECK(again.at(doc).chains[c][m].start == ann.chains[c][m].start);
        CHECK(again.at(doc).chains[c][m].end == ann.chains[c][m].end);
      }
    }
  }
}

TEST_CASE("relation table: frequency bucketing with lexicographic ties") {
  std::vector<RawRelation> raw = {{"a", "b", "subclass of"},
                                  {"c", "d", "subclass of"},
                                  {"e", "f", "subclass of"},
                                  {"c", "d", "sport"}};
  auto table = build_relation_table(raw, 1);
  CHECK(table.kept_relations() == std::set<std::string>{"subclass of"});
  CHECK(*table.lookup("a", "b") == "subclass of");
  CHECK(*table.lookup("c", "d") == "subclass of");  // first occurrence wins the pair
  CHECK_FALSE(table.lookup("b", "a").has_value());  // direction-sensitive
  CHECK_FALSE(table.lookup("x", "y").has_value());
}

TEST_CASE("relation table: keep_top zero buckets everything to others") {
  std::vector<RawRelation> raw = {{"a", "b", "sport"}};
  auto table = build_relation_table(raw, 0);
  CHECK(*table.lookup("a", "b") == "others");
}

TEST_CASE("relation table: empty input yields empty table") {
  auto table = build_relation_table({}, 5);
  CHECK(table.size() == 0);
  CHECK_FALSE(table.lookup("a", "b").has_value());
}

TEST_CASE("relation table: frequency ranking at realistic counts") {
  // 'subclass of' (27015) must outrank 'sport' (10646) at keep_top=1
  std::vector<RawRelation> raw;
  for (int i = 0; i < 27015; ++i) raw.push_back({"t" + std::to_string(i), "u", "subclass of"});
  for (int i = 0; i < 10646; ++i) raw.push_back({"v" + std::to_string(i), "w", "sport"});
  auto table = build_relation_table(raw, 1);
  CHECK(table.kept_relations().count("subclass of") == 1);
  CHECK(table.kept_relations().count("sport") == 0);
}

TEST_CASE("relation table build is input-order independent") {
  std::vector<RawRelation> raw = {{"a", "b", "r1"}, {"c", "d", "r2"}, {"e", "f", "r2"}};
  auto t1 = build_relation_table(raw, 1);
  std::reverse(raw.begin(), raw.end());
  auto t2 = build_relation_table(raw, 1);
  CHECK(t1.kept_relations() == t2.kept_relations());
  CHECK(*t1.lookup("a", "b") == *t2.lookup("a", "b"));
}

TEST_CASE("lemma table lookup with lowercase identity fallback") {
  LemmaTable table(std::map<std::string, std::string>{{"films", "film"}});
  CHECK(table.lemma("films") == "film");
  CHECK(table.lemma("Running") == "running");
}

TEST_CASE("pseudo-gold: exact segment match wins") {
  auto s = testutil::make_sample({3}, false, {"doc0", 1});
  s.documents[0].segments[2].text = "completely unique phrasing here";
  auto gold = induce_pseudo_gold(s, "completely unique phrasing here");
  CHECK(gold == GoldRef{"doc0", 3});
}

TEST_CASE("pseudo-gold: zero overlap falls back to first segment of first doc") {
  auto s = testutil::make_sample({2, 2}, false, {"doc0", 1});
  auto gold = induce_pseudo_gold(s, "zzz qqq xxx");
  CHECK(gold == GoldRef{"doc0", 1});
}

TEST_CASE("pseudo-gold: hand-computed 3-segment case") {
  // segments share 0, 2-of-3, 0 tokens with the response; uF1 by hand:
  // s1: 0; s2: overlap 2, |hyp|=3, |ref|=3 -> 2/3; s3: 0
  auto s = testutil::make_sample({3}, false, {"doc0", 1});
  s.documents[0].segments[0].text = "alpha beta gamma";
  s.documents[0].segments[1].text = "delta epsilon zeta";
  s.documents[0].segments[2].text = "eta theta iota";
  auto gold = induce_pseudo_gold(s, "delta epsilon kappa");
  CHECK(gold == GoldRef{"doc0", 2});
}

TEST_CASE("pseudo-gold is invariant under response token reordering") {
  auto s = testutil::make_sample({3, 2}, false, {"doc0", 1});
  s.documents[1].segments[1].text = "relevant tokens appear here often";
  auto a = induce_pseudo_gold(s, "relevant tokens appear");
  auto b = induce_pseudo_gold(s, "appear relevant tokens");
  CHECK(a == b);
}

TEST_CASE("fallback coref annotator links repeated capitalized runs") {
  Document doc;
  doc.doc_id = "d";
  doc.topic = "t";
  doc.segments = {{"d", 1, "Paris is the capital of France"},
                  {"d", 2, "many tourists visit Paris every year"},
                  {"d", 3, "nothing capitalized here"},
                  {"d", 4, "The answer is unknown"}};
  auto ann = fallback_coref_annotation(doc);
  REQUIRE(ann.chains.size() == 1);  // "Paris"; "France" once; "The" is a stopword
  CHECK(ann.chains[0].size() == 2);
  std::set<int> segs;
  for (const auto& m : ann.chains[0]) segs.insert(m.segment_index);
  CHECK(segs == std::set<int>{1, 2});
  // spans point at the actual run text
  const auto& m0 = ann.chains[0][0];
  CHECK(doc.segments[0].text.substr(m0.start, m0.end - m0.start) == "Paris");
}

TEST_CASE("fallback entities are capitalized runs per segment") {
  Document doc;
  doc.doc_id = "d";
  doc.topic = "t";
  doc.segments = {{"d", 1, "the United States border"}, {"d", 2, "plain text"}};
  auto ents = fallback_entities(doc);
  REQUIRE(ents.size() == 2);
  CHECK(ents[0] == std::set<std::string>{"United States"});
  CHECK(ents[1].empty());
}

TEST_CASE("synthetic corpus is deterministic for a fixed seed") {
  SynthSpec spec;
  spec.n_samples = 6;
  auto a = generate_synthetic_corpus(7, spec);
  auto b = generate_synthetic_corpus(7, spec);
  TempDir tmp;
  save_corpus(a.corpus, tmp.file("a.json"));
  save_corpus(b.corpus, tmp.file("b.json"));
  CHECK(testutil::read_file(tmp.file("a.json")) == testutil::read_file(tmp.file("b.json")));
  save_coref_annotations(a.annotations, tmp.file("aa.json"));
  save_coref_annotations(b.annotations, tmp.file("bb.json"));
  CHECK(testutil::read_file(tmp.file("aa.json")) == testutil::read_file(tmp.file("bb.json")));

  auto c = generate_synthetic_corpus(8, spec);
  TempDir tmp2;
  save_corpus(c.corpus, tmp2.file("c.json"));
  CHECK(testutil::read_file(tmp.file("a.json")) != testutil::read_file(tmp2.file("c.json")));
}

TEST_CASE("synthetic boundary: one doc, one segment") {
  SynthSpec spec;
  spec.n_samples = 4;
  spec.max_docs = 1;
  spec.max_segments = 1;
  auto bundle = generate_synthetic_corpus(3, spec);
  for (const auto& s : bundle.corpus) {
    CHECK(s.documents.size() == 1);
    CHECK(s.documents[0].segments.size() == 1);
  }
}

TEST_CASE("coref-discriminative flavor: gold is the unique chain partner of the previous gold") {
  SynthSpec spec;
  spec.n_samples = 24;
  spec.flavor = SynthFlavor::coref_discriminative;
  auto bundle = generate_synthetic_corpus(11, spec);
  REQUIRE(bundle.corpus.size() == 24);
  for (const auto& s : bundle.corpus) {
    auto history = s.labeled_history();
    REQUIRE(history.size() == 1);
    const GoldRef prev = history.back();
    CHECK(prev.doc_id == s.gold.doc_id);  // intra-topic by construction
    CHECK(prev.segment_index != s.gold.segment_index);

    // exhaustive traversal: segments sharing a chain with the previous gold
    REQUIRE(bundle.annotations.count(prev.doc_id));
    std::set<int> partners;
    for (const auto& chain : bundle.annotations.at(prev.doc_id).chains) {
      std::set<int> segs;
      for (const auto& m : chain) segs.insert(m.segment_index);
      if (segs.count(prev.segment_index))
        for (int j : segs)
          if (j != prev.segment_index) partners.insert(j);
    }
    CHECK(partners == std::set<int>{s.gold.segment_index});

    // the final user turn must not leak gold tokens
    const auto& final_turn = s.turns.back().utterance;
    const auto& gold_text = s.find_document(s.gold.doc_id)->segment(s.gold.segment_index).text;
    for (const auto& tok : text::tokenize(gold_text))
      CHECK(final_turn.find(tok) == std::string::npos);
  }
}

TEST_CASE("holle adapter splits a movie into four pseudo-topic documents") {
  TempDir tmp;
  testutil::write_file(tmp.file("h.json"), R"({
    "samples": [{
      "id": "h1",
      "turns": [{"role": "user", "text": "seen it?"}],
      "movie": {
        "title": "Blade Runner",
        "plots": ["a blade runner must pursue replicants", "the film is set in los angeles"],
        "comments": ["one of the best films ever"],
        "reviews": ["critics praised the visuals"],
        "table": ["director ridley scott"]
      },
      "gold": {"category": "comments", "sent": 1}
    }]
  })");
  auto split = load_corpus(tmp.file("h.json"), Schema::holle);
  REQUIRE(split.size() == 1);
  CHECK(split[0].documents.size() == 4);
  CHECK(split[0].gold.doc_id == "Blade Runner#comments");
  CHECK(split[0].gold.segment_index == 1);

  HolleOptions opt;
  opt.four_topic_split = false;
  auto merged = load_corpus(tmp.file("h.json"), Schema::holle, opt);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].documents.size() == 1);
  CHECK(merged[0].documents[0].segments.size() == 5);
  CHECK(merged[0].gold.segment_index == 3);  // 2 plot sentences precede comments
}
