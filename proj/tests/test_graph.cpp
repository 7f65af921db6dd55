#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "corefdiffs/errors.hpp"
#include "corefdiffs/graph.hpp"
#include "graph_oracle.hpp"
#include "test_util.hpp"

using namespace corefdiffs;
using namespace corefdiffs::graph;
using namespace corefdiffs::corpus;
using testutil::fixture;

namespace {

Resources mini_resources() {
  Resources res;
  res.relations = build_relation_table(load_raw_relations(fixture("mini_relations.tsv")), 2);
  res.lemmas = load_lemma_table(fixture("mini_lemmas.tsv"));
  res.coref = load_coref_annotations(fixture("mini_coref.json"));
  return res;
}

std::multiset<graph_oracle::EdgeTriple> to_multiset(const CorefMDG& g) {
  std::multiset<graph_oracle::EdgeTriple> out;
  for (const auto& e : g.edges) out.insert({e.src, e.dst, e.type});
  return out;
}

}  // namespace

TEST_CASE("edge vocabulary layout is frozen and dense") {
  RelationTable table({{{"UK", "London"}, "capital_of"}}, {"capital_of"});
  auto vocab = EdgeVocab::build(3, table);
  CHECK(vocab->id_of("self_loop") == 0);
  CHECK(vocab->id_of("sent_1") == 1);
  CHECK(vocab->id_of("sent_3") == 3);
  CHECK(vocab->id_of("sent_max") == 4);
  CHECK(vocab->id_of("word_overlap") == 5);
  CHECK(vocab->id_of("commonsense:capital_of") == 6);
  CHECK(vocab->id_of("others") == 7);
  CHECK(vocab->id_of("coreference_link") == 8);
  CHECK(vocab->id_of("common_entity") == 9);
  CHECK(vocab->id_of("partial_order") == 10);
  CHECK(vocab->size() == 11);
  for (int i = 0; i < vocab->size(); ++i) CHECK(vocab->type(i).id == i);

  CHECK(vocab->sent_type_id(2) == vocab->id_of("sent_2"));
  CHECK(vocab->sent_type_id(3) == vocab->id_of("sent_3"));
  CHECK(vocab->sent_type_id(4) == vocab->id_of("sent_max"));
  CHECK(vocab->sent_type_id(99) == vocab->id_of("sent_max"));
  CHECK_THROWS_AS(vocab->id_of("nope"), ValidationError);
}

TEST_CASE("all edge families off leaves sent edges and self loops") {
  auto s = testutil::make_sample({2, 2}, false, {"doc0", 1});
  Resources res;
  GraphVariantConfig v;
  v.topic_edges = false;
  v.knowledge_mode = KnowledgeEdgeMode::none;
  auto vocab = EdgeVocab::build(40, res.relations);
  auto g = build_graph(s, res, v, vocab);
  CHECK(g.num_topics() == 2);
  CHECK(g.num_knowledge() == 4);
  // 4 sent_j pairs x 2 directions + 6 self loops
  CHECK(g.edges.size() == 8 + 6);
  for (const auto& e : g.edges) {
    auto name = vocab->type(e.type).name;
    CHECK((name == "self_loop" || name.rfind("sent_", 0) == 0));
  }
}

TEST_CASE("topic_knowledge_edges types follow segment index with the sent_max cap") {
  Document doc;
  doc.doc_id = "d";
  doc.topic = "t";
  for (int j = 1; j <= 5; ++j) doc.segments.push_back({"d", j, "s"});
  RelationTable none;
  auto vocab = EdgeVocab::build(3, none);  // J_max + 2 segments
  auto edges = topic_knowledge_edges(doc, 0, 1, *vocab);
  REQUIRE(edges.size() == 10);
  CHECK(edges[0].type == vocab->id_of("sent_1"));
  CHECK(edges[2].type == vocab->id_of("sent_2"));
  CHECK(edges[4].type == vocab->id_of("sent_3"));
  CHECK(edges[6].type == vocab->id_of("sent_max"));
  CHECK(edges[8].type == vocab->id_of("sent_max"));
  // both directions share the type
  CHECK(edges[0].src == 0);
  CHECK(edges[1].dst == 0);
  CHECK(edges[0].type == edges[1].type);
}

TEST_CASE("word overlap requires a shared lemma") {
  RelationTable none;
  auto vocab = EdgeVocab::build(40, none);
  LemmaTable lemmas;
  CHECK(word_overlap_edges({"blue", "red"}, lemmas, *vocab).empty());
  auto e = word_overlap_edges({"science fiction film", "science fiction novel"}, lemmas, *vocab);
  CHECK(e.size() == 2);
  auto hair = word_overlap_edges({"hair loss", "management of hair loss"}, lemmas, *vocab);
  CHECK(hair.size() == 2);
  // lemma table maps surface variants together
  LemmaTable plural(std::map<std::string, std::string>{{"films", "film"}});
  auto via_lemma = word_overlap_edges({"classic films", "film"}, plural, *vocab);
  CHECK(via_lemma.size() == 2);
  CHECK(word_overlap_edges({"solo topic"}, lemmas, *vocab).empty());
}

TEST_CASE("commonsense edges: stored direction, others reverse, absent pairs skipped") {
  RelationTable table({{{"UK", "London"}, "capital_of"}, {{"a", "b"}, "rare"}},
                      {"capital_of"});
  auto vocab = EdgeVocab::build(40, table);

  SUBCASE("kept relation with others reverse") {
    auto e = commonsense_edges({"UK", "London"}, table, *vocab);
    REQUIRE(e.size() == 2);
    CHECK(e[0] == Edge{0, 1, vocab->id_of("commonsense:capital_of")});
    CHECK(e[1] == Edge{1, 0, vocab->id_of("others")});
  }
  SUBCASE("absent pair yields nothing") {
    CHECK(commonsense_edges({"UK", "Paris"}, table, *vocab).empty());
  }
  SUBCASE("low-frequency relation lands in the others bucket") {
    auto e = commonsense_edges({"a", "b"}, table, *vocab);
    REQUIRE(e.size() == 2);
    CHECK(e[0].type == vocab->id_of("others"));
    CHECK(e[1].type == vocab->id_of("others"));
  }
}

TEST_CASE("coreference edges: chain pairs, single-segment chains, pair enumeration") {
  Document doc;
  doc.doc_id = "d";
  doc.topic = "t";
  for (int j = 1; j <= 6; ++j) doc.segments.push_back({"d", j, "some segment text"});
  RelationTable none;
  auto vocab = EdgeVocab::build(40, none);

  SUBCASE("mentions in segments {2,6} connect 2 and 6") {
    CorefAnnotation ann{"d", {{{2, 0, 4}, {6, 0, 4}}}};
    auto e = coreference_edges(doc, ann, 1, *vocab);
    REQUIRE(e.size() == 2);
    CHECK(e[0] == Edge{2, 6, vocab->id_of("coreference_link")});
    CHECK(e[1] == Edge{6, 2, vocab->id_of("coreference_link")});
  }
  SUBCASE("chain inside one segment yields nothing") {
    CorefAnnotation ann{"d", {{{4, 0, 4}, {4, 5, 9}}}};
    CHECK(coreference_edges(doc, ann, 1, *vocab).empty());
  }
  SUBCASE("chain over {1,3,5} yields all unordered pairs") {
    CorefAnnotation ann{"d", {{{1, 0, 4}, {3, 0, 4}, {5, 0, 4}}}};
    auto e = coreference_edges(doc, ann, 1, *vocab);
    CHECK(e.size() == 6);  // 3 pairs x 2 directions
  }
  SUBCASE("mention out of bounds raises") {
    CorefAnnotation ann{"d", {{{2, 0, 4}, {6, 0, 1000}}}};
    CHECK_THROWS_AS(coreference_edges(doc, ann, 1, *vocab), ValidationError);
  }
  SUBCASE("annotation for another doc raises") {
    CorefAnnotation ann{"other", {{{2, 0, 4}, {6, 0, 4}}}};
    CHECK_THROWS_AS(coreference_edges(doc, ann, 1, *vocab), ValidationError);
  }
}

TEST_CASE("common entity edges use pairwise set intersection") {
  Document doc;
  doc.doc_id = "d";
  doc.topic = "t";
  doc.segments = {{"d", 1, "x"}, {"d", 2, "y"}, {"d", 3, "z"}};
  RelationTable none;
  auto vocab = EdgeVocab::build(40, none);

  std::vector<std::set<std::string>> ents = {{"Seattle"}, {"Seattle", "Tacoma"}, {"Portland"}};
  auto e = common_entity_edges(doc, ents, 1, *vocab);
  REQUIRE(e.size() == 2);
  CHECK(e[0] == Edge{1, 2, vocab->id_of("common_entity")});

  std::vector<std::set<std::string>> disjoint = {{"A"}, {"B"}, {"C"}};
  CHECK(common_entity_edges(doc, disjoint, 1, *vocab).empty());
}

TEST_CASE("partial order edges with hop window") {
  Document doc;
  doc.doc_id = "d";
  doc.topic = "t";
  for (int j = 1; j <= 4; ++j) doc.segments.push_back({"d", j, "s"});
  RelationTable none;
  auto vocab = EdgeVocab::build(40, none);

  auto e2 = partial_order_edges(doc, 2, 0, *vocab);
  std::set<std::pair<int, int>> fwd;
  for (const auto& e : e2)
    if (e.src < e.dst) fwd.insert({e.src + 1, e.dst + 1});
  CHECK(fwd == std::set<std::pair<int, int>>{{1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}});
  CHECK(e2.size() == 10);  // both directions materialized

  auto e1 = partial_order_edges(doc, 1, 0, *vocab);
  CHECK(e1.size() == 6);  // chain only

  CHECK_THROWS_AS(partial_order_edges(doc, 0, 0, *vocab), ValidationError);
}

TEST_CASE("build_graph equals the brute-force oracle on the mini corpus, all variants") {
  auto samples = load_corpus(fixture("mini_corpus.json"));
  Resources res = mini_resources();
  auto vocab = EdgeVocab::build(40, res.relations);

  for (const auto& name : GraphVariantConfig::variant_names()) {
    CAPTURE(name);
    GraphVariantConfig variant = GraphVariantConfig::from_name(name);
    for (const auto& s : samples) {
      CAPTURE(s.sample_id);
      auto g = build_graph(s, res, variant, vocab);
      auto expected = graph_oracle::enumerate_edges(s, res, variant, *vocab);
      CHECK(to_multiset(g) == expected);
    }
  }
}

TEST_CASE("build_graph equals the oracle on random synthetic corpora") {
  for (uint64_t seed : {101, 202}) {
    for (auto flavor : {SynthFlavor::generic, SynthFlavor::coref_discriminative}) {
      SynthSpec spec;
      spec.n_samples = 10;
      spec.max_docs = 4;
      spec.max_segments = 5;
      spec.flavor = flavor;
      auto bundle = generate_synthetic_corpus(seed, spec);
      Resources res{bundle.relations, bundle.lemmas, bundle.annotations};
      // j_max below the segment cap exercises the sent_max bucket
      auto vocab = EdgeVocab::build(4, res.relations);
      for (const auto& name : GraphVariantConfig::variant_names()) {
        auto variant = GraphVariantConfig::from_name(name);
        for (const auto& s : bundle.corpus) {
          CAPTURE(seed);
          CAPTURE(name);
          CAPTURE(s.sample_id);
          auto g = build_graph(s, res, variant, vocab);
          CHECK(to_multiset(g) == graph_oracle::enumerate_edges(s, res, variant, *vocab));
        }
      }
    }
  }
}

TEST_CASE("mini corpus hand counts: word_overlap, commonsense, and case-study pairs") {
  auto samples = load_corpus(fixture("mini_corpus.json"));
  Resources res = mini_resources();
  auto vocab = EdgeVocab::build(40, res.relations);
  GraphVariantConfig full;

  // s1: "hair loss" <-> "management of hair loss" word overlap
  auto g1 = build_graph(samples[0], res, full, vocab);
  int overlap = 0;
  for (const auto& e : g1.edges)
    if (e.type == vocab->id_of("word_overlap")) ++overlap;
  CHECK(overlap == 2);

  // s2: UK -> London commonsense capital_of, reverse typed others
  auto g2 = build_graph(samples[1], res, full, vocab);
  bool fwd = false, rev = false;
  for (const auto& e : g2.edges) {
    if (e.type == vocab->id_of("commonsense:capital_of")) fwd = (e.src == 0 && e.dst == 1);
    if (e.type == vocab->id_of("others")) rev = rev || (e.src == 1 && e.dst == 0);
  }
  CHECK(fwd);
  CHECK(rev);

  // s3: the second -> sixth sentence coreference dependency
  auto g3 = build_graph(samples[2], res, full, vocab);
  int k2 = g3.knowledge_vertex("d_seattle", 2);
  int k6 = g3.knowledge_vertex("d_seattle", 6);
  bool found = false;
  for (const auto& e : g3.edges)
    if (e.src == k2 && e.dst == k6 && e.type == vocab->id_of("coreference_link")) found = true;
  CHECK(found);
}

TEST_CASE("graph invariants on the mini corpus") {
  auto samples = load_corpus(fixture("mini_corpus.json"));
  Resources res = mini_resources();
  auto vocab = EdgeVocab::build(40, res.relations);
  GraphVariantConfig full;

  for (const auto& s : samples) {
    auto g = build_graph(s, res, full, vocab);
    // M = |D|, N = sum of segments
    int n = 0;
    for (const auto& d : s.documents) n += static_cast<int>(d.segments.size());
    CHECK(g.num_topics() == static_cast<int>(s.documents.size()));
    CHECK(g.num_knowledge() == n);

    // sorted, unique, valid endpoints, exactly one self loop per vertex
    std::vector<int> self_count(static_cast<size_t>(g.num_vertices()), 0);
    for (size_t i = 0; i < g.edges.size(); ++i) {
      const auto& e = g.edges[i];
      CHECK(e.src >= 0);
      CHECK(e.src < g.num_vertices());
      CHECK(e.dst >= 0);
      CHECK(e.dst < g.num_vertices());
      if (i) CHECK(g.edges[i - 1] < e);
      if (e.type == vocab->id_of("self_loop")) {
        CHECK(e.src == e.dst);
        ++self_count[static_cast<size_t>(e.src)];
      }
    }
    for (int c : self_count) CHECK(c == 1);

    // no knowledge-knowledge edge crosses documents, under every variant
    for (const auto& name : GraphVariantConfig::variant_names()) {
      auto gv = build_graph(s, res, GraphVariantConfig::from_name(name), vocab);
      for (const auto& e : gv.edges) {
        if (!gv.is_topic(e.src) && !gv.is_topic(e.dst) && e.src != e.dst) {
          CHECK(gv.knowledge_refs[static_cast<size_t>(e.src - gv.num_topics())].first ==
                gv.knowledge_refs[static_cast<size_t>(e.dst - gv.num_topics())].first);
        }
      }
    }

    // symmetric pairs: every non-self edge has a reverse edge of some type
    for (const auto& e : g.edges) {
      if (e.src == e.dst) continue;
      bool has_rev = false;
      for (const auto& r : g.edges)
        if (r.src == e.dst && r.dst == e.src) has_rev = true;
      CHECK(has_rev);
    }
  }
}

TEST_CASE("disabling a family removes exactly that family") {
  auto samples = load_corpus(fixture("mini_corpus.json"));
  Resources res = mini_resources();
  auto vocab = EdgeVocab::build(40, res.relations);

  auto g_full = build_graph(samples[0], res, GraphVariantConfig::from_name("full"), vocab);
  auto g_nokg = build_graph(samples[0], res, GraphVariantConfig::from_name("no_kg"), vocab);

  std::multiset<graph_oracle::EdgeTriple> full_set = to_multiset(g_full);
  std::multiset<graph_oracle::EdgeTriple> nokg_set = to_multiset(g_nokg);
  // removed edges are exactly the coreference links
  std::vector<graph_oracle::EdgeTriple> removed;
  std::set_difference(full_set.begin(), full_set.end(), nokg_set.begin(), nokg_set.end(),
                      std::back_inserter(removed));
  CHECK(!removed.empty());
  for (const auto& [src, dst, type] : removed)
    CHECK(vocab->type(type).name == "coreference_link");
  // and nothing was added
  std::vector<graph_oracle::EdgeTriple> added;
  std::set_difference(nokg_set.begin(), nokg_set.end(), full_set.begin(), full_set.end(),
                      std::back_inserter(added));
  CHECK(added.empty());
}

TEST_CASE("graph construction is a pure function") {
  auto samples = load_corpus(fixture("mini_corpus.json"));
  Resources res = mini_resources();
  auto vocab = EdgeVocab::build(40, res.relations);
  GraphVariantConfig full;
  auto a = build_graph(samples[0], res, full, vocab);
  auto b = build_graph(samples[0], res, full, vocab);
  CHECK(a.edges == b.edges);
}

TEST_CASE("graph_stats averages undirected counts per family") {
  auto samples = load_corpus(fixture("mini_corpus.json"));
  Resources res = mini_resources();
  auto vocab = EdgeVocab::build(40, res.relations);
  GraphVariantConfig full;

  std::vector<CorefMDG> graphs;
  for (const auto& s : samples) graphs.push_back(build_graph(s, res, full, vocab));
  auto stats = graph_stats(graphs);

  // hand-counted manifest for the full variant
  CHECK(stats.n_graphs == 4);
  CHECK(stats.avg_per_family.at("sent") == doctest::Approx((9 + 5 + 6 + 8) / 4.0));
  CHECK(stats.avg_per_family.at("word_overlap") == doctest::Approx(1.0 / 4.0));
  CHECK(stats.avg_per_family.at("commonsense") == doctest::Approx(2.0 / 4.0));
  CHECK(stats.avg_per_family.at("coreference_link") == doctest::Approx((1 + 1 + 4 + 1) / 4.0));
  CHECK(stats.avg_per_family.at("self_loop") == doctest::Approx((11 + 7 + 7 + 10) / 4.0));
  CHECK(stats.avg_per_family.at("common_entity") == doctest::Approx(0.0));
  CHECK(stats.avg_per_family.at("partial_order") == doctest::Approx(0.0));

  // single-graph averages are the raw counts
  auto one = graph_stats({graphs[2]});
  CHECK(one.avg_per_family.at("coreference_link") == doctest::Approx(4.0));

  // two-graph mean
  auto two = graph_stats({graphs[0], graphs[2]});
  CHECK(two.avg_per_family.at("coreference_link") == doctest::Approx((1 + 4) / 2.0));

  // variant-specific families
  std::vector<CorefMDG> ce, po;
  for (const auto& s : samples) {
    ce.push_back(build_graph(s, res, GraphVariantConfig::from_name("kg_common_entity"), vocab));
    po.push_back(build_graph(s, res, GraphVariantConfig::from_name("kg_partial_order"), vocab));
  }
  CHECK(graph_stats(ce).avg_per_family.at("common_entity") ==
        doctest::Approx((1 + 1 + 1 + 1) / 4.0));
  CHECK(graph_stats(po).avg_per_family.at("partial_order") ==
        doctest::Approx((12 + 4 + 9 + 10) / 4.0));
}

TEST_CASE("DOT and JSON exports") {
  auto samples = load_corpus(fixture("mini_corpus.json"));
  Resources res = mini_resources();
  auto vocab = EdgeVocab::build(40, res.relations);
  auto g = build_graph(samples[1], res, GraphVariantConfig{}, vocab);

  std::ostringstream dot;
  write_dot(g, samples[1], dot);
  CHECK(dot.str().find("digraph") != std::string::npos);
  CHECK(dot.str().find("commonsense:capital_of") != std::string::npos);

  std::string json = to_json(g);
  CHECK(json.find("\"sample\": \"s2\"") != std::string::npos);
  CHECK(json.find("coreference_link") != std::string::npos);
}

TEST_CASE("variant names round-trip") {
  for (const auto& name : GraphVariantConfig::variant_names())
    CHECK(GraphVariantConfig::from_name(name).canonical_name() == name);
  CHECK_THROWS_AS(GraphVariantConfig::from_name("bogus"), ValidationError);
}
