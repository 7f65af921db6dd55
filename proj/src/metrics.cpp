#include "corefdiffs/metrics.hpp"

#include <map>

#include "corefdiffs/errors.hpp"
#include "corefdiffs/text.hpp"

namespace corefdiffs::eval {

namespace {

using Counts = std::map<std::string, int>;

Counts unigram_counts(const std::vector<std::string>& toks) {
  Counts c;
  for (const auto& t : toks) ++c[t];
  return c;
}

Counts bigram_counts(const std::vector<std::string>& toks) {
  Counts c;
  for (size_t i = 0; i + 1 < toks.size(); ++i) ++c[toks[i] + "\x1f" + toks[i + 1]];
  return c;
}

double multiset_f1(const Counts& hyp, const Counts& ref) {
  long hyp_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [k, v] : hyp) hyp_total += v;
  for (const auto& [k, v] : ref) ref_total += v;
  for (const auto& [k, v] : hyp) {
    auto it = ref.find(k);
    if (it != ref.end()) overlap += std::min(v, it->second);
  }
  if (hyp_total == 0 && ref_total == 0) return 1.0;
  if (hyp_total == 0 || ref_total == 0) return 0.0;
  if (overlap == 0) return 0.0;
  double p = static_cast<double>(overlap) / static_cast<double>(hyp_total);
  double r = static_cast<double>(overlap) / static_cast<double>(ref_total);
  return 2.0 * p * r / (p + r);
}

}  // namespace

F1Pair uf1_bf1(const std::string& hypothesis, const std::string& reference) {
  auto hyp = text::tokenize(hypothesis);
  auto ref = text::tokenize(reference);
  // empty-vs-empty scores 1, empty-vs-non-empty 0, decided on tokens so that
  // bF1 cannot score an empty hypothesis against a one-token reference
  if (hyp.empty() || ref.empty()) {
    double v = (hyp.empty() && ref.empty()) ? 1.0 : 0.0;
    return {v, v};
  }
  F1Pair out;
  out.uf1 = multiset_f1(unigram_counts(hyp), unigram_counts(ref));
  out.bf1 = multiset_f1(bigram_counts(hyp), bigram_counts(ref));
  return out;
}

double unigram_f1(const std::string& hypothesis, const std::string& reference) {
  auto hyp = text::tokenize(hypothesis);
  auto ref = text::tokenize(reference);
  return multiset_f1(unigram_counts(hyp), unigram_counts(ref));
}

SelectionMetrics selection_metrics(const std::vector<SelectionPrediction>& predictions,
                                   const std::vector<SampleLabel>& labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("selection_metrics: " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  SelectionMetrics m;
  m.n_samples = static_cast<int>(labels.size());
  if (m.n_samples == 0) return m;

  int kl_hits = 0, tp_hits = 0, intra_hits = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    const bool knl_ok = predictions[i].knowledge_index == labels[i].knowledge_index;
    const bool tpc_ok = predictions[i].topic_index == labels[i].topic_index;
    if (knl_ok) ++kl_hits;
    if (tpc_ok) ++tp_hits;
    if (labels[i].prev_topic_index &&
        *labels[i].prev_topic_index == labels[i].topic_index) {
      ++m.n_intra_topic;
      if (knl_ok) ++intra_hits;
    }
  }
  m.kl = static_cast<double>(kl_hits) / m.n_samples;
  m.tp = static_cast<double>(tp_hits) / m.n_samples;
  if (m.n_intra_topic > 0) {
    m.in_tp = static_cast<double>(intra_hits) / m.n_intra_topic;
  }
  return m;
}

SampleLabel label_of(const corpus::DialogSample& sample) {
  SampleLabel label;
  label.topic_index = sample.document_index(sample.gold.doc_id);
  int flat = 0;
  for (const auto& doc : sample.documents) {
    if (doc.doc_id == sample.gold.doc_id) {
      label.knowledge_index = flat + sample.gold.segment_index - 1;
      break;
    }
    flat += static_cast<int>(doc.segments.size());
  }
  auto history = sample.labeled_history();
  if (!history.empty()) {
    label.prev_topic_index = sample.document_index(history.back().doc_id);
  }
  return label;
}

}  // namespace corefdiffs::eval
