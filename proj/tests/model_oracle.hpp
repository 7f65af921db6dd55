#pragma once

// Independent loop-based re-implementations of the model's forward pieces,
// used to pin the tape path at tight tolerances. Plain per-vertex loops,
// no tape, no Eigen expression sharing with the implementation.

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "corefdiffs/model.hpp"

namespace model_oracle {

using corefdiffs::model::GraphView;
using corefdiffs::model::GruLayerParams;
using corefdiffs::model::HeadParams;
using corefdiffs::model::Instance;
using corefdiffs::model::ModelParams;
using corefdiffs::model::RgatLayerParams;

inline double leaky(double x, double a) { return x > 0 ? x : a * x; }

inline Eigen::MatrixXd rgat_layer(const Eigen::MatrixXd& h_in, const GraphView& g,
                                  const Eigen::MatrixXd& edge_table,
                                  const RgatLayerParams& layer, double alpha_slope) {
  const int V = g.num_vertices();
  const int d_in = static_cast<int>(h_in.cols());
  const size_t n_edges = g.src->size();

  Eigen::MatrixXd msg_avg = Eigen::MatrixXd::Zero(V, d_in);
  for (const auto& head : layer.heads) {
    Eigen::MatrixXd px = h_in * head.proj;
    Eigen::MatrixXd qr = edge_table * head.edge_proj;

    std::vector<double> logits(n_edges);
    for (size_t e = 0; e < n_edges; ++e) {
      double s = 0.0;
      for (int c = 0; c < d_in; ++c) {
        s += head.attn_dst(c, 0) * px((*g.dst)[e], c);
        s += head.attn_src(c, 0) * px((*g.src)[e], c);
        s += head.attn_edge(c, 0) * qr((*g.type)[e], c);
      }
      logits[e] = leaky(s, alpha_slope);
    }
    std::vector<double> denom(static_cast<size_t>(V), 0.0);
    std::vector<double> num(n_edges);
    for (size_t e = 0; e < n_edges; ++e) {
      num[e] = std::exp(logits[e]);
      denom[static_cast<size_t>((*g.dst)[e])] += num[e];
    }
    Eigen::MatrixXd msg = Eigen::MatrixXd::Zero(V, d_in);
    for (size_t e = 0; e < n_edges; ++e) {
      double a = num[e] / denom[static_cast<size_t>((*g.dst)[e])];
      for (int c = 0; c < d_in; ++c)
        msg((*g.dst)[e], c) += a * (px((*g.src)[e], c) + qr((*g.type)[e], c));
    }
    msg_avg += msg;
  }
  msg_avg /= static_cast<double>(layer.heads.size());

  Eigen::MatrixXd cat(V, 2 * d_in);
  cat << h_in, msg_avg;
  return cat * layer.out;
}

inline Eigen::MatrixXd propagate(const Eigen::MatrixXd& h0, const GraphView& g,
                                 const ModelParams& params, double alpha_slope) {
  Eigen::MatrixXd h = h0;
  for (const auto& layer : params.rgat) h = rgat_layer(h, g, params.edge_table, layer, alpha_slope);
  return h;
}

// One batched GRU step: h' = (1 - z) .* h + z .* tanh(...)
inline Eigen::MatrixXd gru_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& h,
                                const GruLayerParams& p) {
  const int V = static_cast<int>(x.rows());
  const int dh = static_cast<int>(h.cols());
  Eigen::MatrixXd out(V, dh);
  for (int v = 0; v < V; ++v) {
    Eigen::VectorXd xh(x.cols() + dh);
    xh << x.row(v).transpose(), h.row(v).transpose();
    Eigen::VectorXd z =
        (1.0 / (1.0 + (-(p.wz.transpose() * xh + p.bz.row(0).transpose())).array().exp()));
    Eigen::VectorXd r =
        (1.0 / (1.0 + (-(p.wr.transpose() * xh + p.br.row(0).transpose())).array().exp()));
    Eigen::VectorXd xrh(x.cols() + dh);
    xrh << x.row(v).transpose(), (r.array() * h.row(v).transpose().array()).matrix();
    Eigen::VectorXd hbar = (p.wh.transpose() * xrh + p.bh.row(0).transpose()).array().tanh();
    out.row(v) = ((1.0 - z.array()) * h.row(v).transpose().array() + z.array() * hbar.array())
                     .matrix()
                     .transpose();
  }
  return out;
}

inline Eigen::MatrixXd linearize(const Eigen::MatrixXd& hg, const Instance& inst,
                                 const ModelParams& params, int tau, int gru_layers,
                                 bool plain_history) {
  const int V = inst.g.num_vertices();
  const int dg = static_cast<int>(hg.cols());
  auto slots = corefdiffs::model::history_slot_vertices(inst, tau);

  std::vector<Eigen::MatrixXd> state(static_cast<size_t>(gru_layers),
                                     Eigen::MatrixXd::Zero(V, dg));
  for (int p = 0; p < tau; ++p) {
    Eigen::MatrixXd x(V, 2 * dg);
    for (int v = 0; v < V; ++v) {
      Eigen::RowVectorXd hist;
      if (slots[static_cast<size_t>(p)].first < 0) {
        hist = params.null_hist.row(0);
      } else if (v < inst.g.num_topics) {
        hist = hg.row(slots[static_cast<size_t>(p)].first);
      } else {
        hist = hg.row(slots[static_cast<size_t>(p)].second);
      }
      if (plain_history) {
        x.row(v) << hist, Eigen::RowVectorXd::Zero(dg);
      } else {
        x.row(v) << hist - hg.row(v), (hist.array() * hg.row(v).array()).matrix();
      }
    }
    Eigen::MatrixXd layer_in = x;
    for (int layer = 0; layer < gru_layers; ++layer) {
      state[static_cast<size_t>(layer)] =
          gru_step(layer_in, state[static_cast<size_t>(layer)], params.gru[static_cast<size_t>(layer)]);
      layer_in = state[static_cast<size_t>(layer)];
    }
  }
  Eigen::MatrixXd hd(V, 2 * dg);
  hd << state.back(), hg;
  return hd;
}

inline Eigen::VectorXd topic_logits(const Eigen::MatrixXd& hd, const GraphView& g,
                                    const HeadParams& head) {
  Eigen::VectorXd out(g.num_topics);
  for (int i = 0; i < g.num_topics; ++i) out(i) = hd.row(i).dot(head.w.col(0)) + head.b(0, 0);
  return out;
}

inline Eigen::VectorXd knowledge_logits(const Eigen::MatrixXd& hd, const GraphView& g,
                                        const Eigen::MatrixXd& edge_table,
                                        const HeadParams& head) {
  Eigen::VectorXd out(g.num_knowledge);
  for (int k = 0; k < g.num_knowledge; ++k) {
    Eigen::VectorXd feat(2 * hd.cols() + edge_table.cols());
    feat << hd.row(g.num_topics + k).transpose(),
        hd.row(g.parent_topic[static_cast<size_t>(k)]).transpose(),
        edge_table.row(g.sent_type[static_cast<size_t>(k)]).transpose();
    out(k) = feat.dot(head.w.col(0)) + head.b(0, 0);
  }
  return out;
}

inline double cross_entropy(const Eigen::VectorXd& logits, int gold) {
  double mx = logits.maxCoeff();
  double lse = std::log((logits.array() - mx).exp().sum()) + mx;
  return lse - logits(gold);
}

}  // namespace model_oracle
