#include "corefdiffs/model.hpp"

#include <cmath>

#include "corefdiffs/errors.hpp"
#include "corefdiffs/rng.hpp"

namespace corefdiffs::model {

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_diff_seq: return "no_diff_seq";
    case Ablation::no_diff: return "no_diff";
    case Ablation::no_res_rgat: return "no_res_rgat";
  }
  return "none";
}

Ablation ablation_from_name(const std::string& name) {
  if (name == "none" || name.empty()) return Ablation::none;
  if (name == "no_diff_seq") return Ablation::no_diff_seq;
  if (name == "no_diff") return Ablation::no_diff;
  if (name == "no_res_rgat") return Ablation::no_res_rgat;
  throw ValidationError("unknown ablation '" + name + "'");
}

uint64_t ModelConfig::hash(int n_edge_types) const {
  std::string repr = std::to_string(d_init) + "/" + std::to_string(d_g) + "/" +
                     std::to_string(d_e) + "/" + std::to_string(heads) + "/" +
                     std::to_string(layers) + "/" + std::to_string(leaky_alpha) + "/" +
                     std::to_string(history_slots) + "/" + std::to_string(resolved_tau()) +
                     "/" + std::to_string(gru_layers) + "/" + ablation_name(ablation) + "/E" +
                     std::to_string(n_edge_types);
  return fnv1a_str(repr);
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.d_init = 320;  // BERT features projected 768 -> 320
  c.d_g = 1024;
  c.d_e = 64;
  c.heads = 8;
  c.layers = 2;
  c.history_slots = 4;
  return c;
}

GraphView GraphView::from(const graph::CorefMDG& g) {
  GraphView v;
  v.num_topics = g.num_topics();
  v.num_knowledge = g.num_knowledge();
  v.n_edge_types = g.vocab->size();

  auto src = std::make_shared<std::vector<int>>();
  auto dst = std::make_shared<std::vector<int>>();
  auto type = std::make_shared<std::vector<int>>();
  for (const auto& e : g.edges) {
    src->push_back(e.src);
    dst->push_back(e.dst);
    type->push_back(e.type);
  }
  v.src = src;
  v.dst = dst;
  v.type = type;

  auto kind = std::make_shared<std::vector<int>>();
  for (int i = 0; i < v.num_vertices(); ++i) kind->push_back(i < v.num_topics ? 0 : 1);
  v.kind_index = kind;

  for (int k = 0; k < v.num_knowledge; ++k) {
    v.parent_topic.push_back(g.parent_topic_of(v.num_topics + k));
    v.sent_type.push_back(g.vocab->sent_type_id(g.knowledge_refs[static_cast<size_t>(k)].second));
  }
  return v;
}

Instance Instance::build(const corpus::DialogSample& sample, const graph::CorefMDG& g,
                         const encoder::VertexEmbeddings& h0, int history_slots) {
  Instance inst;
  inst.g = GraphView::from(g);
  inst.h0 = h0.matrix;
  inst.sample_id = sample.sample_id;
  if (inst.h0.rows() != inst.g.num_vertices())
    throw ValidationError("Instance: H0 has " + std::to_string(inst.h0.rows()) +
                          " rows for " + std::to_string(inst.g.num_vertices()) + " vertices");

  auto locate = [&](const corpus::GoldRef& ref, int& topic_out, int& knl_out) {
    topic_out = g.topic_vertex(ref.doc_id);
    int vid = g.knowledge_vertex(ref.doc_id, ref.segment_index);
    if (topic_out < 0 || vid < 0)
      throw ValidationError("Instance: gold reference " + ref.doc_id + ":" +
                            std::to_string(ref.segment_index) + " not in graph of sample " +
                            sample.sample_id);
    knl_out = vid - g.num_topics();
  };
  locate(sample.gold, inst.gold_topic, inst.gold_knowledge);

  auto history = sample.labeled_history();  // oldest first
  inst.hist_topic.assign(static_cast<size_t>(history_slots), -1);
  inst.hist_knowledge.assign(static_cast<size_t>(history_slots), -1);
  for (int q = 0; q < history_slots && q < static_cast<int>(history.size()); ++q) {
    const auto& ref = history[history.size() - 1 - static_cast<size_t>(q)];
    locate(ref, inst.hist_topic[static_cast<size_t>(q)],
           inst.hist_knowledge[static_cast<size_t>(q)]);
  }
  return inst;
}

int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

Eigen::VectorXd diff_compare(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw ValidationError("diff_compare: dim mismatch " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  Eigen::VectorXd out(2 * a.size());
  out.head(a.size()) = a - b;
  out.tail(a.size()) = a.cwiseProduct(b);
  return out;
}

ad::Var Binder::operator()(const Eigen::MatrixXd& m) {
  auto it = bound_.find(&m);
  if (it != bound_.end()) return it->second;
  ad::Var v = tape_.leaf(m, with_grad_);
  bound_.emplace(&m, v);
  return v;
}

namespace {

Eigen::MatrixXd init_matrix(int rows, int cols, Rng& rng) {
  double std = std::sqrt(2.0 / (rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, std);
  return m;
}

Eigen::MatrixXd init_vector_col(int rows, Rng& rng, double std) {
  Eigen::MatrixXd m(rows, 1);
  for (int i = 0; i < rows; ++i) m(i, 0) = rng.normal(0.0, std);
  return m;
}

}  // namespace

Model::Model(ModelConfig cfg, int n_edge_types, uint64_t seed)
    : cfg_(cfg), n_edge_types_(n_edge_types) {
  if (cfg_.d_init < 1 || cfg_.d_g < 1 || cfg_.d_e < 1 || cfg_.heads < 1 || cfg_.layers < 1 ||
      cfg_.gru_layers < 1 || cfg_.history_slots < 1 || cfg_.resolved_tau() < 1)
    throw ValidationError("ModelConfig: all dimensions and counts must be >= 1");
  if (n_edge_types_ < 1) throw ValidationError("Model: empty edge vocabulary");

  Rng rng(seed ^ 0x5eedf00dULL);
  params_.edge_table = init_matrix(n_edge_types_, cfg_.d_e, rng);

  for (int layer = 0; layer < cfg_.layers; ++layer) {
    const int d_in = layer == 0 ? cfg_.d_init : cfg_.d_g;
    RgatLayerParams lp;
    for (int h = 0; h < cfg_.heads; ++h) {
      RgatHeadParams hp;
      hp.proj = init_matrix(d_in, d_in, rng);
      hp.edge_proj = init_matrix(cfg_.d_e, d_in, rng);
      hp.attn_dst = init_vector_col(d_in, rng, 0.3);
      hp.attn_src = init_vector_col(d_in, rng, 0.3);
      hp.attn_edge = init_vector_col(d_in, rng, 0.3);
      lp.heads.push_back(std::move(hp));
    }
    lp.out = init_matrix(2 * d_in, cfg_.d_g, rng);
    params_.rgat.push_back(std::move(lp));
  }

  for (int layer = 0; layer < cfg_.gru_layers; ++layer) {
    const int d_x = layer == 0 ? 2 * cfg_.d_g : cfg_.d_g;
    GruLayerParams gp;
    gp.wz = init_matrix(d_x + cfg_.d_g, cfg_.d_g, rng);
    gp.wr = init_matrix(d_x + cfg_.d_g, cfg_.d_g, rng);
    gp.wh = init_matrix(d_x + cfg_.d_g, cfg_.d_g, rng);
    gp.bz = Eigen::MatrixXd::Zero(1, cfg_.d_g);
    gp.br = Eigen::MatrixXd::Zero(1, cfg_.d_g);
    gp.bh = Eigen::MatrixXd::Zero(1, cfg_.d_g);
    params_.gru.push_back(std::move(gp));
  }

  params_.null_hist = init_matrix(1, cfg_.d_g, rng) * 0.1;

  auto make_head = [&](int in_dim) {
    HeadParams h;
    h.w = init_matrix(in_dim, 1, rng);
    h.b = Eigen::MatrixXd::Zero(1, 1);
    return h;
  };
  params_.topic_head = make_head(2 * cfg_.d_g);
  params_.knowledge_head = make_head(4 * cfg_.d_g + cfg_.d_e);
  for (int i = 0; i < cfg_.history_slots; ++i) {
    params_.hist_topic_heads.push_back(make_head(2 * cfg_.d_g));
    params_.hist_knowledge_heads.push_back(make_head(4 * cfg_.d_g + cfg_.d_e));
  }

  if (cfg_.ablation == Ablation::no_res_rgat)
    params_.adapter = init_matrix(cfg_.d_init, cfg_.d_g, rng);
}

ad::Var Model::rgat_layer(ad::Tape& t, Binder& bind, ad::Var h_in, const GraphView& g,
                          ad::Var edge_table, const RgatLayerParams& layer,
                          std::vector<Eigen::VectorXd>* attention) const {
  const int V = g.num_vertices();
  ad::Var msg_sum;
  for (const auto& head : layer.heads) {
    ad::Var px = t.matmul(h_in, bind(head.proj));          // V x d_in
    ad::Var qr = t.matmul(edge_table, bind(head.edge_proj));  // E x d_in
    ad::Var s_dst = t.matmul(px, bind(head.attn_dst));
    ad::Var s_src = t.matmul(px, bind(head.attn_src));
    ad::Var s_type = t.matmul(qr, bind(head.attn_edge));

    ad::Var e = t.add(t.add(t.gather_rows(s_dst, g.dst), t.gather_rows(s_src, g.src)),
                      t.gather_rows(s_type, g.type));
    e = t.leaky_relu(e, cfg_.leaky_alpha);
    ad::Var alpha = t.segment_softmax(e, g.dst, V);
    if (attention) attention->push_back(t.value(alpha).col(0));

    ad::Var content = t.add(t.gather_rows(px, g.src), t.gather_rows(qr, g.type));
    ad::Var msg = t.scatter_sum_rows(t.colbcast_mul(alpha, content), g.dst, V);
    msg_sum = msg_sum.valid() ? t.add(msg_sum, msg) : msg;
  }
  ad::Var msg_avg = t.scale(msg_sum, 1.0 / static_cast<double>(layer.heads.size()));
  return t.matmul(t.concat_cols(h_in, msg_avg), bind(layer.out));
}

ad::Var Model::propagate(ad::Tape& t, Binder& bind, ad::Var h0, const GraphView& g) const {
  if (cfg_.ablation == Ablation::no_res_rgat) return t.matmul(h0, bind(params_.adapter));
  ad::Var h = h0;
  for (const auto& layer : params_.rgat) {
    h = rgat_layer(t, bind, h, g, bind(params_.edge_table), layer);
  }
  return h;
}

ad::Var Model::gru_cell(ad::Tape& t, Binder& bind, ad::Var x, ad::Var h,
                        const GruLayerParams& p) const {
  ad::Var xh = t.concat_cols(x, h);
  ad::Var z = t.sigmoid(t.add_rowvec(t.matmul(xh, bind(p.wz)), bind(p.bz)));
  ad::Var r = t.sigmoid(t.add_rowvec(t.matmul(xh, bind(p.wr)), bind(p.br)));
  ad::Var xrh = t.concat_cols(x, t.mul(r, h));
  ad::Var hbar = t.tanh(t.add_rowvec(t.matmul(xrh, bind(p.wh)), bind(p.bh)));
  ad::Var ones = t.leaf(Eigen::MatrixXd::Ones(t.value(z).rows(), t.value(z).cols()));
  // h' = (1 - z) .* h + z .* hbar
  return t.add(t.mul(t.sub(ones, z), h), t.mul(z, hbar));
}

std::vector<std::pair<int, int>> history_slot_vertices(const Instance& inst, int tau) {
  std::vector<std::pair<int, int>> out;
  for (int p = 0; p < tau; ++p) {
    // time step p runs oldest -> newest; slot q counts back from the newest
    const int q = tau - 1 - p;
    if (q < static_cast<int>(inst.hist_topic.size()) &&
        inst.hist_topic[static_cast<size_t>(q)] >= 0) {
      out.emplace_back(inst.hist_topic[static_cast<size_t>(q)],
                       inst.g.num_topics + inst.hist_knowledge[static_cast<size_t>(q)]);
    } else {
      out.emplace_back(-1, -1);
    }
  }
  return out;
}

ad::Var Model::linearize(ad::Tape& t, Binder& bind, ad::Var hg, const Instance& inst) const {
  const GraphView& g = inst.g;
  const int V = g.num_vertices();
  const int d_g = static_cast<int>(t.value(hg).cols());

  if (cfg_.ablation == Ablation::no_diff_seq) {
    ad::Var zeros = t.leaf(Eigen::MatrixXd::Zero(V, d_g));
    return t.concat_cols(zeros, hg);
  }

  const int tau = cfg_.resolved_tau();
  std::vector<ad::Var> gru_state(static_cast<size_t>(cfg_.gru_layers),
                                 t.leaf(Eigen::MatrixXd::Zero(V, d_g)));
  ad::Var last_hidden;

  const auto slots = history_slot_vertices(inst, tau);
  for (int p = 0; p < tau; ++p) {
    ad::Var topic_row, knl_row;
    if (slots[static_cast<size_t>(p)].first >= 0) {
      auto t_idx = std::make_shared<std::vector<int>>(
          std::vector<int>{slots[static_cast<size_t>(p)].first});
      auto k_idx = std::make_shared<std::vector<int>>(
          std::vector<int>{slots[static_cast<size_t>(p)].second});
      topic_row = t.gather_rows(hg, t_idx);
      knl_row = t.gather_rows(hg, k_idx);
    } else {
      topic_row = bind(params_.null_hist);
      knl_row = bind(params_.null_hist);
    }
    // vertex kind selects its own history stream
    ad::Var srows = t.concat_rows(topic_row, knl_row);      // 2 x d_g
    ad::Var hist = t.gather_rows(srows, g.kind_index);      // V x d_g

    ad::Var x;
    if (cfg_.ablation == Ablation::no_diff) {
      // plain history vectors, zero-padded to the 2*d_g input width
      ad::Var zeros = t.leaf(Eigen::MatrixXd::Zero(V, d_g));
      x = t.concat_cols(hist, zeros);
    } else {
      x = t.concat_cols(t.sub(hist, hg), t.mul(hist, hg));  // F(hist, h_i)
    }

    for (size_t layer = 0; layer < params_.gru.size(); ++layer) {
      gru_state[layer] = gru_cell(t, bind, x, gru_state[layer], params_.gru[layer]);
      x = gru_state[layer];
    }
    last_hidden = gru_state.back();
  }
  return t.concat_cols(last_hidden, hg);
}

ad::Var Model::score_topic(ad::Tape& t, Binder& bind, ad::Var hd, const GraphView& g,
                           const HeadParams& head) const {
  auto topic_ids = std::make_shared<std::vector<int>>();
  for (int i = 0; i < g.num_topics; ++i) topic_ids->push_back(i);
  ad::Var feats = t.gather_rows(hd, topic_ids);
  return t.add_rowvec(t.matmul(feats, bind(head.w)), bind(head.b));
}

ad::Var Model::score_knowledge(ad::Tape& t, Binder& bind, ad::Var hd, ad::Var edge_table,
                               const GraphView& g, const HeadParams& head) const {
  auto knl_ids = std::make_shared<std::vector<int>>();
  auto par_ids = std::make_shared<std::vector<int>>();
  auto sent_ids = std::make_shared<std::vector<int>>();
  for (int k = 0; k < g.num_knowledge; ++k) {
    knl_ids->push_back(g.num_topics + k);
    par_ids->push_back(g.parent_topic[static_cast<size_t>(k)]);
    sent_ids->push_back(g.sent_type[static_cast<size_t>(k)]);
  }
  ad::Var feats = t.concat_cols(
      t.concat_cols(t.gather_rows(hd, knl_ids), t.gather_rows(hd, par_ids)),
      t.gather_rows(edge_table, sent_ids));
  return t.add_rowvec(t.matmul(feats, bind(head.w)), bind(head.b));
}

Model::ForwardVars Model::forward(ad::Tape& t, Binder& bind, const Instance& inst,
                                  std::vector<Eigen::VectorXd>* attention) const {
  if (!inst.h0.allFinite())
    throw RuntimeFailure("forward: non-finite H0 for sample " + inst.sample_id);
  if (inst.h0.cols() != cfg_.d_init)
    throw ValidationError("forward: H0 dim " + std::to_string(inst.h0.cols()) +
                          " != d_init " + std::to_string(cfg_.d_init));

  ForwardVars fv;
  ad::Var h0 = t.leaf(inst.h0);
  if (cfg_.ablation == Ablation::no_res_rgat) {
    fv.hg = t.matmul(h0, bind(params_.adapter));
  } else {
    ad::Var h = h0;
    ad::Var table = bind(params_.edge_table);
    for (const auto& layer : params_.rgat) h = rgat_layer(t, bind, h, inst.g, table, layer, attention);
    fv.hg = h;
  }
  fv.hd = linearize(t, bind, fv.hg, inst);

  ad::Var table = bind(params_.edge_table);
  fv.topic_logits = score_topic(t, bind, fv.hd, inst.g, params_.topic_head);
  fv.knowledge_logits = score_knowledge(t, bind, fv.hd, table, inst.g, params_.knowledge_head);

  fv.loss_knl = t.cross_entropy(fv.knowledge_logits, inst.gold_knowledge);
  fv.loss_tpc = t.cross_entropy(fv.topic_logits, inst.gold_topic);

  const int l = cfg_.history_slots;
  ad::Var hist_sum;
  for (int hi = 0; hi < l; ++hi) {
    ad::Var tl = score_topic(t, bind, fv.hd, inst.g, params_.hist_topic_heads[static_cast<size_t>(hi)]);
    ad::Var kl = score_knowledge(t, bind, fv.hd, table, inst.g,
                                 params_.hist_knowledge_heads[static_cast<size_t>(hi)]);
    fv.hist_topic_logits.push_back(tl);
    fv.hist_knowledge_logits.push_back(kl);
    if (hi < static_cast<int>(inst.hist_topic.size()) && inst.hist_topic[static_cast<size_t>(hi)] >= 0) {
      ad::Var term = t.add(t.cross_entropy(kl, inst.hist_knowledge[static_cast<size_t>(hi)]),
                           t.cross_entropy(tl, inst.hist_topic[static_cast<size_t>(hi)]));
      hist_sum = hist_sum.valid() ? t.add(hist_sum, term) : term;
    }
  }
  if (hist_sum.valid()) {
    // skipped slots contribute zero; the 1/(2l) normalizer is fixed
    fv.loss_hist = t.scale(hist_sum, 1.0 / (2.0 * static_cast<double>(l)));
  } else {
    fv.loss_hist = t.leaf(Eigen::MatrixXd::Zero(1, 1));
  }
  fv.loss = t.add(t.add(fv.loss_knl, fv.loss_tpc), fv.loss_hist);
  return fv;
}

ModelOutput Model::predict(const Instance& inst) const {
  ad::Tape t;
  Binder bind(t, false);
  ForwardVars fv = forward(t, bind, inst);

  ModelOutput out;
  out.topic_logits = t.value(fv.topic_logits).col(0);
  out.knowledge_logits = t.value(fv.knowledge_logits).col(0);
  for (auto v : fv.hist_topic_logits) out.hist_topic_logits.push_back(t.value(v).col(0));
  for (auto v : fv.hist_knowledge_logits) out.hist_knowledge_logits.push_back(t.value(v).col(0));
  out.hg = t.value(fv.hg);
  out.hd = t.value(fv.hd);
  out.topic_argmax = argmax_lowest(out.topic_logits);
  out.knowledge_argmax = argmax_lowest(out.knowledge_logits);
  if (!out.topic_logits.allFinite() || !out.knowledge_logits.allFinite())
    throw RuntimeFailure("predict: non-finite logits for sample " + inst.sample_id);
  return out;
}

LossBreakdown Model::loss_value(const Instance& inst) const {
  ad::Tape t;
  Binder bind(t, false);
  ForwardVars fv = forward(t, bind, inst);
  LossBreakdown b;
  b.total = t.value(fv.loss)(0, 0);
  b.knowledge = t.value(fv.loss_knl)(0, 0);
  b.topic = t.value(fv.loss_tpc)(0, 0);
  b.history = t.value(fv.loss_hist)(0, 0);
  return b;
}

std::map<std::string, Eigen::MatrixXd> Model::gradients(const Instance& inst,
                                                        LossBreakdown* breakdown) {
  ad::Tape t;
  Binder bind(t, true);
  ForwardVars fv = forward(t, bind, inst);
  if (!std::isfinite(t.value(fv.loss)(0, 0)))
    throw RuntimeFailure("non-finite loss (sample " + inst.sample_id + ")");
  t.backward(fv.loss);

  if (breakdown) {
    breakdown->total = t.value(fv.loss)(0, 0);
    breakdown->knowledge = t.value(fv.loss_knl)(0, 0);
    breakdown->topic = t.value(fv.loss_tpc)(0, 0);
    breakdown->history = t.value(fv.loss_hist)(0, 0);
  }

  std::map<std::string, Eigen::MatrixXd> grads;
  params_.for_each([&](const std::string& name, Eigen::MatrixXd& m) {
    const Eigen::MatrixXd& g = t.grad(bind(m));
    if (!g.allFinite())
      throw RuntimeFailure("non-finite gradient for parameter " + name + " (sample " +
                           inst.sample_id + ")");
    grads.emplace(name, g);
  });
  return grads;
}

}  // namespace corefdiffs::model
