#include "corefdiffs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "corefdiffs/errors.hpp"
#include "corefdiffs/rng.hpp"

namespace corefdiffs::trainer {

using nlohmann::json;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (lr < 0.0) throw ValidationError("train: lr must be non-negative");
  if (warmup_steps < 1) throw ValidationError("train: warmup_steps must be >= 1");
  if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
    throw ValidationError("train: holdout_fraction must be in [0, 1)");
  if (patience < 1) throw ValidationError("train: patience must be >= 1");
  if (j_max < 1) throw ValidationError("train: j_max must be >= 1");
  variant.validate();
}

uint64_t TrainConfig::hash(int n_edge_types) const {
  std::string repr = std::to_string(lr) + "/" + std::to_string(warmup_steps) + "/" +
                     std::to_string(epochs) + "/" + std::to_string(total_steps) + "/" +
                     std::to_string(seed) + "/" + std::to_string(holdout_fraction) + "/" +
                     std::to_string(patience) + "/" + (shuffle ? "s1" : "s0") + "/" +
                     std::to_string(j_max) + "/" + variant.canonical_name();
  return fnv1a_str(repr, dims.hash(n_edge_types));
}

double lr_at(double lr, int warmup_steps, long total_steps, long step) {
  if (step <= warmup_steps)
    return lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return 0.0;
  double frac = static_cast<double>(total_steps - step) /
                static_cast<double>(total_steps - warmup_steps);
  return lr * std::max(0.0, frac);
}

// ---- checkpoint ----

namespace {

constexpr char kMagic[8] = {'C', 'D', 'C', 'K', '0', '0', '0', '1'};

void append_tensor_list(ordered_json& j, const char* key,
                        const std::map<std::string, Eigen::MatrixXd>& tensors) {
  j[key] = ordered_json::array();
  for (const auto& [name, m] : tensors)
    j[key].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
}

void write_tensors(std::string& out, const std::map<std::string, Eigen::MatrixXd>& tensors) {
  for (const auto& [name, m] : tensors) {
    const char* p = reinterpret_cast<const char*>(m.data());
    out.append(p, sizeof(double) * static_cast<size_t>(m.size()));
  }
}

size_t read_tensors(const std::string& bytes, size_t off, const json& list,
                    std::map<std::string, Eigen::MatrixXd>& out) {
  for (const auto& jt : list) {
    std::string name = jt.at("name").get<std::string>();
    Eigen::Index rows = jt.at("rows").get<Eigen::Index>();
    Eigen::Index cols = jt.at("cols").get<Eigen::Index>();
    Eigen::MatrixXd m(rows, cols);
    size_t n = sizeof(double) * static_cast<size_t>(m.size());
    if (off + n > bytes.size()) throw ValidationError("checkpoint: truncated tensor data");
    std::memcpy(m.data(), bytes.data() + off, n);
    off += n;
    out.emplace(std::move(name), std::move(m));
  }
  return off;
}

ordered_json config_to_json(const model::ModelConfig& c) {
  ordered_json j;
  j["d_init"] = c.d_init;
  j["d_g"] = c.d_g;
  j["d_e"] = c.d_e;
  j["heads"] = c.heads;
  j["layers"] = c.layers;
  j["leaky_alpha"] = c.leaky_alpha;
  j["history_slots"] = c.history_slots;
  j["tau"] = c.tau;
  j["gru_layers"] = c.gru_layers;
  j["ablation"] = model::ablation_name(c.ablation);
  return j;
}

model::ModelConfig config_from_json(const json& j) {
  model::ModelConfig c;
  c.d_init = j.at("d_init").get<int>();
  c.d_g = j.at("d_g").get<int>();
  c.d_e = j.at("d_e").get<int>();
  c.heads = j.at("heads").get<int>();
  c.layers = j.at("layers").get<int>();
  c.leaky_alpha = j.at("leaky_alpha").get<double>();
  c.history_slots = j.at("history_slots").get<int>();
  c.tau = j.at("tau").get<int>();
  c.gru_layers = j.at("gru_layers").get<int>();
  c.ablation = model::ablation_from_name(j.at("ablation").get<std::string>());
  return c;
}

}  // namespace

std::string Checkpoint::serialize() const {
  ordered_json header;
  header["version"] = 1;
  header["config"] = config_to_json(config);
  header["n_edge_types"] = n_edge_types;
  header["config_hash"] = config_hash;
  header["vocab"] = vocab_names;
  header["step"] = step;
  header["metrics"] = {{"kl", kl}, {"tp", tp}};
  append_tensor_list(header, "tensors", tensors);
  append_tensor_list(header, "adam_m", adam_m);
  append_tensor_list(header, "adam_v", adam_v);

  std::string hs = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  uint64_t len = hs.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += hs;
  write_tensors(out, tensors);
  write_tensors(out, adam_m);
  write_tensors(out, adam_v);
  return out;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write checkpoint " + path);
  std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + sizeof(uint64_t) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ValidationError("checkpoint: bad magic");
  uint64_t len = 0;
  std::memcpy(&len, bytes.data() + sizeof(kMagic), sizeof(len));
  size_t off = sizeof(kMagic) + sizeof(uint64_t);
  if (off + len > bytes.size()) throw ValidationError("checkpoint: truncated header");
  json header;
  try {
    header = json::parse(bytes.substr(off, len));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint header: ") + e.what());
  }
  off += len;

  Checkpoint ck;
  ck.config = config_from_json(header.at("config"));
  ck.n_edge_types = header.at("n_edge_types").get<int>();
  ck.config_hash = header.at("config_hash").get<uint64_t>();
  ck.vocab_names = header.at("vocab").get<std::vector<std::string>>();
  ck.step = header.at("step").get<long>();
  ck.kl = header.at("metrics").at("kl").get<double>();
  ck.tp = header.at("metrics").at("tp").get<double>();
  off = read_tensors(bytes, off, header.at("tensors"), ck.tensors);
  off = read_tensors(bytes, off, header.at("adam_m"), ck.adam_m);
  off = read_tensors(bytes, off, header.at("adam_v"), ck.adam_v);
  if (off != bytes.size()) throw ValidationError("checkpoint: trailing bytes");
  return ck;
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

model::Model Checkpoint::restore() const {
  model::Model m(config, n_edge_types, /*seed=*/0);
  m.params().for_each([&](const std::string& name, Eigen::MatrixXd& tensor) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw ValidationError("checkpoint: missing tensor " + name);
    if (it->second.rows() != tensor.rows() || it->second.cols() != tensor.cols())
      throw ValidationError("checkpoint: tensor " + name + " has shape " +
                            std::to_string(it->second.rows()) + "x" +
                            std::to_string(it->second.cols()) + ", expected " +
                            std::to_string(tensor.rows()) + "x" +
                            std::to_string(tensor.cols()));
    tensor = it->second;
  });
  return m;
}

void Checkpoint::check_vocab(const graph::EdgeVocab& vocab) const {
  std::vector<std::string> names;
  for (const auto& t : vocab.types()) names.push_back(t.name);
  if (names != vocab_names)
    throw ValidationError("checkpoint: edge vocabulary mismatch (checkpoint has " +
                          std::to_string(vocab_names.size()) + " types, run has " +
                          std::to_string(names.size()) + ")");
}

// ---- Adam ----

void Adam::step(model::ModelParams& params,
                const std::map<std::string, Eigen::MatrixXd>& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.for_each([&](const std::string& name, Eigen::MatrixXd& tensor) {
    auto git = grads.find(name);
    if (git == grads.end()) throw RuntimeFailure("Adam: missing gradient for " + name);
    const Eigen::MatrixXd& g = git->second;
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      mit = m_.emplace(name, Eigen::MatrixXd::Zero(tensor.rows(), tensor.cols())).first;
      v_.emplace(name, Eigen::MatrixXd::Zero(tensor.rows(), tensor.cols()));
    }
    Eigen::MatrixXd& m = mit->second;
    Eigen::MatrixXd& v = v_.at(name);
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    Eigen::MatrixXd mhat = m / bc1;
    Eigen::MatrixXd vhat = v / bc2;
    tensor.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps_);
  });
}

void Adam::restore(long t, std::map<std::string, Eigen::MatrixXd> m,
                   std::map<std::string, Eigen::MatrixXd> v) {
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

// ---- data preparation ----

PreparedCorpus PreparedCorpus::build(const std::vector<corpus::DialogSample>& samples,
                                     const corpus::Resources& resources,
                                     const graph::GraphVariantConfig& variant,
                                     const encoder::EmbeddingProvider& provider,
                                     int history_slots, int j_max) {
  if (samples.empty()) throw ValidationError("prepare: empty corpus");
  PreparedCorpus out;
  out.vocab = graph::EdgeVocab::build(j_max, resources.relations);
  for (const auto& s : samples) {
    graph::CorefMDG g = graph::build_graph(s, resources, variant, out.vocab);
    encoder::VertexEmbeddings h0 = encoder::encode_vertices(s, g, provider, history_slots);
    out.instances.push_back(model::Instance::build(s, g, h0, history_slots));
    out.labels.push_back(eval::label_of(s));
    out.sample_ids.push_back(s.sample_id);
  }
  return out;
}

eval::SelectionMetrics evaluate(const model::Model& m, const PreparedCorpus& prepared,
                                const std::vector<size_t>& subset) {
  std::vector<eval::SelectionPrediction> preds;
  std::vector<eval::SampleLabel> labels;
  for (size_t idx : subset) {
    model::ModelOutput out = m.predict(prepared.instances[idx]);
    preds.push_back({out.topic_argmax, out.knowledge_argmax});
    labels.push_back(prepared.labels[idx]);
  }
  return eval::selection_metrics(preds, labels);
}

// ---- training loop ----

TrainResult train(const TrainConfig& config,
                  const std::vector<corpus::DialogSample>& samples,
                  const corpus::Resources& resources,
                  const encoder::EmbeddingProvider& provider) {
  config.validate();
  if (samples.empty()) throw ValidationError("train: empty corpus");

  PreparedCorpus prepared = PreparedCorpus::build(samples, resources, config.variant, provider,
                                                  config.dims.history_slots, config.j_max);

  const size_t n = prepared.instances.size();
  size_t n_holdout = static_cast<size_t>(std::floor(config.holdout_fraction * static_cast<double>(n)));
  if (config.holdout_fraction > 0.0 && n_holdout == 0) n_holdout = 1;
  const size_t n_train = n - n_holdout;
  if (n_train == 0) throw ValidationError("train: holdout leaves no training samples");

  TrainResult result;
  for (size_t i = 0; i < n_train; ++i) result.train_indices.push_back(i);
  for (size_t i = n_train; i < n; ++i) result.eval_indices.push_back(i);
  const std::vector<size_t>& eval_set =
      result.eval_indices.empty() ? result.train_indices : result.eval_indices;

  model::Model m(config.dims, prepared.vocab->size(), config.seed);
  Adam adam;
  Rng rng(config.seed ^ 0x7121a1bcdull);
  long total_steps = config.total_steps > 0
                         ? config.total_steps
                         : static_cast<long>(config.epochs) * static_cast<long>(n_train);

  std::vector<std::string> vocab_names;
  for (const auto& t : prepared.vocab->types()) vocab_names.push_back(t.name);

  auto snapshot = [&](long step, double kl, double tp) {
    Checkpoint ck;
    ck.config = config.dims;
    ck.n_edge_types = prepared.vocab->size();
    ck.config_hash = config.hash(prepared.vocab->size());
    ck.vocab_names = vocab_names;
    ck.step = step;
    ck.kl = kl;
    ck.tp = tp;
    m.params().for_each(
        [&](const std::string& name, Eigen::MatrixXd& t) { ck.tensors[name] = t; });
    ck.adam_m = adam.m();
    ck.adam_v = adam.v();
    return ck;
  };

  long step = 0;
  double best_kl = -1.0;
  int epochs_since_best = 0;
  bool have_best = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<size_t> order = result.train_indices;
    if (config.shuffle) rng.shuffle(order);

    double epoch_loss = 0.0;
    double lr = 0.0;
    for (size_t idx : order) {
      ++step;
      lr = lr_at(config.lr, config.warmup_steps, total_steps, step);
      model::LossBreakdown bd;
      std::map<std::string, Eigen::MatrixXd> grads;
      try {
        grads = m.gradients(prepared.instances[idx], &bd);
      } catch (const RuntimeFailure& e) {
        throw RuntimeFailure("train: aborted at step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(bd.total))
        throw RuntimeFailure("train: non-finite loss at step " + std::to_string(step) +
                             " (sample " + prepared.sample_ids[idx] + ")");
      adam.step(m.params(), grads, lr);
      epoch_loss += bd.total;
      result.trace.push_back({step, bd.total, lr, -1.0, -1.0});
    }

    eval::SelectionMetrics metrics = evaluate(m, prepared, eval_set);
    result.trace.push_back(
        {step, epoch_loss / static_cast<double>(order.size()), lr, metrics.kl, metrics.tp});
    result.final_metrics = metrics;
    result.epochs_run = epoch;

    if (metrics.kl > best_kl) {
      best_kl = metrics.kl;
      result.best = snapshot(step, metrics.kl, metrics.tp);
      have_best = true;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }

    if (config.stop_at_kl >= 0.0 && metrics.kl >= config.stop_at_kl &&
        (config.stop_at_tp < 0.0 || metrics.tp >= config.stop_at_tp))
      break;
    if (epochs_since_best >= config.patience) break;
  }

  if (!have_best) result.best = snapshot(step, result.final_metrics.kl, result.final_metrics.tp);
  return result;
}

void write_trace_jsonl(const std::vector<TraceRecord>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  for (const auto& r : trace) {
    ordered_json j;
    j["step"] = r.step;
    j["loss"] = r.loss;
    j["lr"] = r.lr;
    if (r.kl >= 0.0) {
      j["kl"] = r.kl;
      j["tp"] = r.tp;
    }
    out << j.dump() << "\n";
  }
}

}  // namespace corefdiffs::trainer
