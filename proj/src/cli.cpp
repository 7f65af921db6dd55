#include "corefdiffs/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "corefdiffs/corpus.hpp"
#include "corefdiffs/encoder.hpp"
#include "corefdiffs/errors.hpp"
#include "corefdiffs/eval.hpp"
#include "corefdiffs/graph.hpp"
#include "corefdiffs/model.hpp"
#include "corefdiffs/rng.hpp"
#include "corefdiffs/trainer.hpp"

namespace corefdiffs::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string command;

  // paths
  std::string corpus_path, coref_path, relations_path, lemmas_path;
  std::string embeddings_path, checkpoint_path, out_dir, config_path, grid_path;
  std::string hyp_path;

  // shared knobs
  std::string profile = "desk";
  uint64_t seed = 1;
  std::string variant = "full";
  std::string ablation = "none";
  std::string schema = "canonical";
  std::string log_level = "info";
  int threads = 1;
  int j_max = 40;

  // synth
  std::string flavor = "both";
  int synth_samples = 64;
  int synth_max_docs = 5;
  int synth_max_segments = 6;

  // model dims (profile defaults, overridable)
  int d_init = 32, d_g = 32, d_e = 16, heads = 4, layers = 2, gru_layers = 2;
  int history_len = 2;
  int tau = -1;

  // training
  double lr = 1e-3;
  int warmup = 50;
  int epochs = 50;
  long total_steps = -1;
  double holdout = 0.0;
  int patience = 10;
  double stop_at_kl = -1.0, stop_at_tp = -1.0;
};

void apply_profile(Options& o) {
  if (o.profile == "desk") {
    o.d_init = 32;
    o.d_g = 32;
    o.d_e = 16;
    o.heads = 4;
    o.history_len = 2;
    o.lr = 1e-3;
    o.warmup = 50;
  } else if (o.profile == "paper") {
    o.d_init = 320;  // BERT output projected 768 -> 320
    o.d_g = 1024;
    o.d_e = 64;
    o.heads = 8;
    o.history_len = 4;
    o.lr = 1e-5;
    o.warmup = 5000;
  } else {
    throw ValidationError("profile must be 'desk' or 'paper', got '" + o.profile + "'");
  }
}

ordered_json options_to_json(const Options& o) {
  ordered_json j;
  j["command"] = o.command;
  j["corpus"] = o.corpus_path;
  j["coref"] = o.coref_path;
  j["relations"] = o.relations_path;
  j["lemmas"] = o.lemmas_path;
  j["embeddings"] = o.embeddings_path;
  j["checkpoint"] = o.checkpoint_path;
  j["out"] = o.out_dir;
  j["grid"] = o.grid_path;
  j["hyp"] = o.hyp_path;
  j["profile"] = o.profile;
  j["seed"] = o.seed;
  j["variant"] = o.variant;
  j["ablation"] = o.ablation;
  j["schema"] = o.schema;
  j["threads"] = o.threads;
  j["j_max"] = o.j_max;
  j["flavor"] = o.flavor;
  j["synth_samples"] = o.synth_samples;
  j["synth_max_docs"] = o.synth_max_docs;
  j["synth_max_segments"] = o.synth_max_segments;
  j["d_init"] = o.d_init;
  j["d_g"] = o.d_g;
  j["d_e"] = o.d_e;
  j["heads"] = o.heads;
  j["layers"] = o.layers;
  j["gru_layers"] = o.gru_layers;
  j["history_len"] = o.history_len;
  j["tau"] = o.tau;
  j["lr"] = o.lr;
  j["warmup"] = o.warmup;
  j["epochs"] = o.epochs;
  j["total_steps"] = o.total_steps;
  j["holdout"] = o.holdout;
  j["patience"] = o.patience;
  j["stop_at_kl"] = o.stop_at_kl;
  j["stop_at_tp"] = o.stop_at_tp;
  return j;
}

void write_manifest(const Options& o) {
  fs::create_directories(o.out_dir);
  ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = o.command;
  ordered_json cfg = options_to_json(o);
  manifest["config"] = cfg;
  manifest["config_hash"] = fnv1a_str(cfg.dump());
  manifest["seed"] = o.seed;
  std::ofstream out(fs::path(o.out_dir) / "manifest.json");
  if (!out) throw RuntimeFailure("cannot write manifest under " + o.out_dir);
  out << manifest.dump(2) << "\n";
}

void log_info(const Options& o, const std::string& msg) {
  if (o.log_level == "error" || o.log_level == "warn") return;
  std::cerr << "[corefdiffs] " << msg << "\n";
}

// resources assembly shared by graph/train/eval/ablate commands
corpus::Resources load_resources(const Options& o,
                                 const std::vector<corpus::DialogSample>& samples) {
  corpus::Resources res;
  graph::GraphVariantConfig variant = graph::GraphVariantConfig::from_name(o.variant);
  if (variant.topic_edges && variant.commonsense && o.relations_path.empty())
    throw ValidationError(
        "--relations is required while commonsense topic edges are enabled "
        "(pass --relations or choose a variant without them)");
  if (!o.relations_path.empty()) {
    auto raw = corpus::load_raw_relations(o.relations_path);
    res.relations = corpus::build_relation_table(raw, 350);
  }
  if (!o.lemmas_path.empty()) res.lemmas = corpus::load_lemma_table(o.lemmas_path);
  if (!o.coref_path.empty()) {
    res.coref = corpus::load_coref_annotations(o.coref_path);
    corpus::validate_annotations(samples, res.coref);
  } else {
    res.coref = corpus::fallback_coref_annotations(samples);
  }
  return res;
}

std::vector<corpus::DialogSample> load_samples(const Options& o) {
  if (o.corpus_path.empty()) throw ValidationError("--corpus is required");
  corpus::Schema schema =
      o.schema == "holle" ? corpus::Schema::holle : corpus::Schema::canonical;
  return corpus::load_corpus(o.corpus_path, schema);
}

std::unique_ptr<encoder::EmbeddingProvider> make_provider(const Options& o) {
  if (!o.embeddings_path.empty()) {
    auto p = encoder::file_provider(o.embeddings_path);
    if (p->dim() != o.d_init)
      throw ValidationError("embedding file dim " + std::to_string(p->dim()) +
                            " != configured d_init " + std::to_string(o.d_init));
    return p;
  }
  return encoder::hashing_featurizer(o.d_init, o.seed);
}

trainer::TrainConfig make_train_config(const Options& o) {
  trainer::TrainConfig cfg;
  cfg.dims.d_init = o.d_init;
  cfg.dims.d_g = o.d_g;
  cfg.dims.d_e = o.d_e;
  cfg.dims.heads = o.heads;
  cfg.dims.layers = o.layers;
  cfg.dims.gru_layers = o.gru_layers;
  cfg.dims.history_slots = o.history_len;
  cfg.dims.tau = o.tau;
  cfg.dims.ablation = model::ablation_from_name(o.ablation);
  cfg.variant = graph::GraphVariantConfig::from_name(o.variant);
  cfg.lr = o.lr;
  cfg.warmup_steps = o.warmup;
  cfg.epochs = o.epochs;
  cfg.total_steps = o.total_steps;
  cfg.seed = o.seed;
  cfg.holdout_fraction = o.holdout;
  cfg.patience = o.patience;
  cfg.j_max = o.j_max;
  cfg.stop_at_kl = o.stop_at_kl;
  cfg.stop_at_tp = o.stop_at_tp;
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << content;
}

// ---- subcommands ----

void cmd_synth_gen(const Options& o) {
  write_manifest(o);
  auto emit = [&](corpus::SynthFlavor flavor, const std::string& prefix) {
    corpus::SynthSpec spec;
    spec.n_samples = o.synth_samples;
    spec.max_docs = o.synth_max_docs;
    spec.max_segments = o.synth_max_segments;
    spec.flavor = flavor;
    corpus::SynthBundle bundle = corpus::generate_synthetic_corpus(o.seed, spec);
    fs::path dir(o.out_dir);
    corpus::save_corpus(bundle.corpus, (dir / (prefix + "_corpus.json")).string());
    corpus::save_coref_annotations(bundle.annotations, (dir / (prefix + "_coref.json")).string());
    corpus::save_raw_relations(bundle.raw_relations, (dir / (prefix + "_relations.tsv")).string());
    corpus::save_lemma_table(bundle.lemmas, (dir / (prefix + "_lemmas.tsv")).string());
    log_info(o, prefix + ": " + std::to_string(bundle.corpus.size()) + " samples");
  };
  if (o.flavor == "generic" || o.flavor == "both")
    emit(corpus::SynthFlavor::generic, "generic");
  if (o.flavor == "coref" || o.flavor == "both")
    emit(corpus::SynthFlavor::coref_discriminative, "coref");
  if (o.flavor != "generic" && o.flavor != "coref" && o.flavor != "both")
    throw ValidationError("--flavor must be generic, coref, or both");
}

std::vector<graph::CorefMDG> build_all_graphs(const Options& o,
                                              const std::vector<corpus::DialogSample>& samples,
                                              const corpus::Resources& res) {
  graph::GraphVariantConfig variant = graph::GraphVariantConfig::from_name(o.variant);
  auto vocab = graph::EdgeVocab::build(o.j_max, res.relations);
  std::vector<graph::CorefMDG> graphs;
  for (const auto& s : samples) graphs.push_back(graph::build_graph(s, res, variant, vocab));
  return graphs;
}

void cmd_build_graph(const Options& o) {
  auto samples = load_samples(o);
  auto res = load_resources(o, samples);
  write_manifest(o);
  auto graphs = build_all_graphs(o, samples, res);

  fs::path dir(o.out_dir);
  ordered_json all = ordered_json::array();
  for (size_t i = 0; i < graphs.size(); ++i) {
    std::ofstream dot(dir / ("sample_" + samples[i].sample_id + ".dot"));
    if (!dot) throw RuntimeFailure("cannot write DOT file under " + o.out_dir);
    graph::write_dot(graphs[i], samples[i], dot);
    all.push_back(ordered_json::parse(graph::to_json(graphs[i])));
  }
  write_file(dir / "graphs.json", all.dump(2) + "\n");
  log_info(o, "built " + std::to_string(graphs.size()) + " graphs (variant " + o.variant + ")");
}

void cmd_graph_stats(const Options& o) {
  auto samples = load_samples(o);
  auto res = load_resources(o, samples);
  write_manifest(o);
  auto graphs = build_all_graphs(o, samples, res);
  graph::GraphStats stats = graph::graph_stats(graphs);

  ordered_json j;
  j["n_graphs"] = stats.n_graphs;
  j["variant"] = o.variant;
  for (const auto& [fam, avg] : stats.avg_per_family) j["avg"][fam] = avg;
  write_file(fs::path(o.out_dir) / "stats.json", j.dump(2) + "\n");

  std::ostringstream csv;
  csv << "family,avg_per_sample\n";
  for (const auto& [fam, avg] : stats.avg_per_family) csv << fam << "," << avg << "\n";
  write_file(fs::path(o.out_dir) / "stats.csv", csv.str());
  std::cout << csv.str();
}

void cmd_train(const Options& o) {
  auto samples = load_samples(o);
  auto res = load_resources(o, samples);
  write_manifest(o);
  auto provider = make_provider(o);
  trainer::TrainConfig cfg = make_train_config(o);

  trainer::TrainResult result = trainer::train(cfg, samples, res, *provider);
  fs::path dir(o.out_dir);
  result.best.save((dir / "checkpoint.bin").string());
  trainer::write_trace_jsonl(result.trace, (dir / "trace.jsonl").string());

  ordered_json summary;
  summary["epochs_run"] = result.epochs_run;
  summary["final"] = {{"kl", result.final_metrics.kl}, {"tp", result.final_metrics.tp}};
  summary["best"] = {{"kl", result.best.kl}, {"tp", result.best.tp}, {"step", result.best.step}};
  write_file(dir / "train_summary.json", summary.dump(2) + "\n");
  std::cout << "train: epochs=" << result.epochs_run << " best KL=" << result.best.kl
            << " TP=" << result.best.tp << "\n";
}

void cmd_eval(const Options& o) {
  if (o.checkpoint_path.empty()) throw ValidationError("--checkpoint is required for eval");
  auto samples = load_samples(o);
  auto res = load_resources(o, samples);
  write_manifest(o);
  auto provider = make_provider(o);

  trainer::Checkpoint ck = trainer::Checkpoint::load(o.checkpoint_path);
  auto vocab = graph::EdgeVocab::build(o.j_max, res.relations);
  ck.check_vocab(*vocab);
  model::Model m = ck.restore();

  graph::GraphVariantConfig variant = graph::GraphVariantConfig::from_name(o.variant);
  trainer::PreparedCorpus prepared = trainer::PreparedCorpus::build(
      samples, res, variant, *provider, ck.config.history_slots, o.j_max);

  std::vector<size_t> all(prepared.instances.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  eval::CorpusEvaluation evaluation = eval::evaluate_corpus(m, prepared, all);

  if (!o.hyp_path.empty()) {
    std::ifstream in(o.hyp_path);
    if (!in) throw RuntimeFailure("cannot open " + o.hyp_path);
    std::map<std::string, std::string> hyps;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      hyps[j.at("id").get<std::string>()] = j.at("text").get<std::string>();
    }
    auto [uf1, bf1] = eval::response_overlap(samples, hyps);
    evaluation.uf1 = uf1;
    evaluation.bf1 = bf1;
  }

  eval::EvalReport report;
  report.split_name = "all";
  report.evaluation = evaluation;
  fs::path dir(o.out_dir);
  write_file(dir / "report.json", report.render_json() + "\n");
  write_file(dir / "report.csv", report.render_csv());
  eval::write_predictions_jsonl(evaluation.rows, (dir / "predictions.jsonl").string());
  std::cout << report.render_csv();
}

void cmd_ablate(const Options& o) {
  if (o.grid_path.empty()) throw ValidationError("--grid is required for ablate");
  auto samples = load_samples(o);
  auto res = load_resources(o, samples);
  write_manifest(o);
  auto provider = make_provider(o);

  std::vector<eval::GridEntry> grid = o.grid_path == "all-variants"
                                          ? eval::full_variant_grid()
                                          : eval::load_grid(o.grid_path);
  trainer::TrainConfig cfg = make_train_config(o);
  eval::AblationReport report = eval::ablate(cfg, grid, samples, res, *provider, o.threads);

  fs::path dir(o.out_dir);
  write_file(dir / "table.csv", report.render_csv());
  write_file(dir / "table.json", report.render_json() + "\n");
  std::cout << report.render_csv();
}

void add_common_path_opts(CLI::App* cmd, Options& o, bool need_out = true) {
  cmd->add_option("--corpus", o.corpus_path, "corpus JSON");
  cmd->add_option("--coref", o.coref_path, "coreference annotation JSON");
  cmd->add_option("--relations", o.relations_path, "relation table TSV");
  cmd->add_option("--lemmas", o.lemmas_path, "lemma table TSV");
  cmd->add_option("--schema", o.schema, "corpus schema: canonical|holle");
  auto* out = cmd->add_option("--out", o.out_dir, "output directory");
  if (need_out) out->required();
}

void add_model_opts(CLI::App* cmd, Options& o) {
  cmd->add_option("--d-init", o.d_init, "initial vertex embedding dim");
  cmd->add_option("--d-g", o.d_g, "graph representation dim");
  cmd->add_option("--d-e", o.d_e, "edge embedding dim");
  cmd->add_option("--heads", o.heads, "attention heads");
  cmd->add_option("--layers", o.layers, "stacked Res-RGAT layers");
  cmd->add_option("--gru-layers", o.gru_layers, "stacked GRU layers");
  cmd->add_option("--history-len", o.history_len, "history length l");
  cmd->add_option("--tau", o.tau, "history sequence length (default: l)");
  cmd->add_option("--embeddings", o.embeddings_path, "precomputed embedding file");
  cmd->add_option("--j-max", o.j_max, "sent_j vocabulary cap");
}

void add_train_opts(CLI::App* cmd, Options& o) {
  cmd->add_option("--lr", o.lr, "initial learning rate");
  cmd->add_option("--warmup", o.warmup, "linear warmup steps");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--total-steps", o.total_steps, "decay endpoint (default epochs*samples)");
  cmd->add_option("--holdout", o.holdout, "held-out tail fraction");
  cmd->add_option("--patience", o.patience, "early-stopping patience (epochs)");
  cmd->add_option("--stop-at-kl", o.stop_at_kl, "stop once eval KL reaches this");
  cmd->add_option("--stop-at-tp", o.stop_at_tp, "stop once eval TP reaches this");
  cmd->add_option("--variant", o.variant, "graph variant name");
  cmd->add_option("--ablation", o.ablation, "none|no_diff_seq|no_diff|no_res_rgat");
}

}  // namespace

int run(int argc, const char* const* argv) {
  Options o;
  if (const char* env = std::getenv("COREFDIFFS_LOG")) o.log_level = env;
  if (const char* env = std::getenv("COREFDIFFS_THREADS")) o.threads = std::atoi(env);

  CLI::App app{"CorefDiffs: co-referential multi-document graphs for dialog knowledge selection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // profile and config behave as layered defaults: profile < config < flags
  std::string config_path_pre;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") config_path_pre = argv[i + 1];
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--profile") o.profile = argv[i + 1];

  try {
    apply_profile(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  json config_json;
  if (!config_path_pre.empty()) {
    std::ifstream in(config_path_pre);
    if (!in) {
      std::cerr << "error: cannot open config file " << config_path_pre << "\n";
      return 1;
    }
    try {
      in >> config_json;
    } catch (const json::exception& e) {
      std::cerr << "error: config file: " << e.what() << "\n";
      return 1;
    }
    auto set_if = [&](const char* key, auto& field) {
      if (config_json.contains(key))
        field = config_json.at(key).get<std::decay_t<decltype(field)>>();
    };
    set_if("seed", o.seed);
    set_if("variant", o.variant);
    set_if("ablation", o.ablation);
    set_if("d_init", o.d_init);
    set_if("d_g", o.d_g);
    set_if("d_e", o.d_e);
    set_if("heads", o.heads);
    set_if("layers", o.layers);
    set_if("gru_layers", o.gru_layers);
    set_if("history_len", o.history_len);
    set_if("tau", o.tau);
    set_if("lr", o.lr);
    set_if("warmup", o.warmup);
    set_if("epochs", o.epochs);
    set_if("total_steps", o.total_steps);
    set_if("holdout", o.holdout);
    set_if("patience", o.patience);
    set_if("j_max", o.j_max);
    set_if("threads", o.threads);
  }

  app.add_option("--config", o.config_path, "JSON config file (flags win on conflict)");
  app.add_option("--profile", o.profile, "desk|paper dimension profile");
  app.add_option("--seed", o.seed, "run seed");
  app.add_option("--threads", o.threads, "parallelism bound");
  app.add_option("--log", o.log_level, "log level: debug|info|warn|error");

  CLI::App* synth = app.add_subcommand("synth-gen", "generate deterministic synthetic corpora");
  synth->add_option("--out", o.out_dir)->required();
  synth->add_option("--flavor", o.flavor, "generic|coref|both");
  synth->add_option("--samples", o.synth_samples);
  synth->add_option("--max-docs", o.synth_max_docs);
  synth->add_option("--max-segments", o.synth_max_segments);

  CLI::App* bg = app.add_subcommand("build-graph", "build Coref-MDGs and export DOT/JSON");
  add_common_path_opts(bg, o);
  bg->add_option("--variant", o.variant);
  bg->add_option("--j-max", o.j_max);

  CLI::App* gs = app.add_subcommand("graph-stats", "per-family average edge counts");
  add_common_path_opts(gs, o);
  gs->add_option("--variant", o.variant);
  gs->add_option("--j-max", o.j_max);

  CLI::App* tr = app.add_subcommand("train", "train CorefDiffs on a corpus");
  add_common_path_opts(tr, o);
  add_model_opts(tr, o);
  add_train_opts(tr, o);

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common_path_opts(ev, o);
  add_model_opts(ev, o);
  ev->add_option("--checkpoint", o.checkpoint_path, "checkpoint path");
  ev->add_option("--variant", o.variant);
  ev->add_option("--hyp", o.hyp_path, "JSONL {id, text} hypotheses for uF1/bF1");

  CLI::App* ab = app.add_subcommand("ablate", "train/eval a variant grid");
  add_common_path_opts(ab, o);
  add_model_opts(ab, o);
  add_train_opts(ab, o);
  ab->add_option("--grid", o.grid_path, "grid JSON or 'all-variants'");

  // global flags (--seed, --profile, ...) remain usable after the subcommand
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  // flags win over config; warn about shadowed config values
  if (!config_json.empty()) {
    for (auto* sub : app.get_subcommands()) {
      for (const auto* opt : sub->get_options()) {
        if (opt->count() == 0) continue;
        std::string key = opt->get_name();
        if (key.rfind("--", 0) == 0) key = key.substr(2);
        std::replace(key.begin(), key.end(), '-', '_');
        if (config_json.contains(key))
          std::cerr << "warning: flag --" << key << " overrides config value\n";
      }
    }
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    o.command = sub->get_name();
    if (o.command == "synth-gen") cmd_synth_gen(o);
    else if (o.command == "build-graph") cmd_build_graph(o);
    else if (o.command == "graph-stats") cmd_graph_stats(o);
    else if (o.command == "train") cmd_train(o);
    else if (o.command == "eval") cmd_eval(o);
    else if (o.command == "ablate") cmd_ablate(o);
    else throw ValidationError("unknown command " + o.command);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace corefdiffs::cli
