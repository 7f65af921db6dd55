#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "corefdiffs/corpus.hpp"
#include "corefdiffs/graph.hpp"

namespace corefdiffs::encoder {

// Marker-interleaved serialization of one (dialog context, document) pair:
//   [CLS] U [SEP] t_i [CLS] k_1 ... [CLS] k_n [SEP]
// with the context spliced newest-first as [USR] u_t [AGT] r_{t-1} ...
struct EncoderInput {
  std::string sample_id;
  std::string doc_id;
  std::vector<std::string> tokens;     // markers and words
  std::vector<int> cls_positions;      // 1 + |d_i| entries; first is the topic
  std::vector<std::string> spans;      // text behind each cls: topic phrase, segments
  std::vector<std::string> context_utterances;  // retained turns, newest first

  std::string serialized() const;  // tokens joined by single spaces
};

EncoderInput build_encoder_input(const corpus::DialogSample& sample,
                                 const corpus::Document& doc, int history_len);

struct ProviderOutput {
  Eigen::MatrixXd vectors;  // one row per cls position
  bool truncated = false;
};

// Deterministic, thread-safe after construction.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  virtual std::string id() const = 0;  // provider id + config hash
  virtual ProviderOutput encode(const EncoderInput& input) const = 0;
};

// H0: (M+N) x d, topic rows first (document order) then knowledge rows
// (document order, then segment order).
struct VertexEmbeddings {
  Eigen::MatrixXd matrix;
  int dim = 0;
  bool any_truncated = false;
};

VertexEmbeddings encode_vertices(const corpus::DialogSample& sample,
                                 const graph::CorefMDG& graph,
                                 const EmbeddingProvider& provider, int history_len);

// Seeded-hash bag-of-tokens projection, L2-normalized. The first four
// dimensions carry span/context interaction statistics (token overlap with
// the full context and with the newest utterance) so that lexical grounding
// is representable independent of the hashed vocabulary.
std::unique_ptr<EmbeddingProvider> hashing_featurizer(int dim, uint64_t seed);

// Reads vectors keyed by (sample id, doc id, cls index) from a JSON-lines
// file whose first line is a header {"dim": d, "provider": id}.
std::unique_ptr<EmbeddingProvider> file_provider(const std::string& path);

struct EmbeddingRecord {
  std::string sample_id;
  std::string doc_id;
  int cls = 0;
  Eigen::VectorXd vec;
};

void write_embedding_file(const std::string& path, int dim, const std::string& provider_id,
                          const std::vector<EmbeddingRecord>& records);

}  // namespace corefdiffs::encoder
