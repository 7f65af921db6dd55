#include "corefdiffs/encoder.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "corefdiffs/errors.hpp"
#include "corefdiffs/rng.hpp"
#include "corefdiffs/text.hpp"

namespace corefdiffs::encoder {

using nlohmann::json;
using nlohmann::ordered_json;

std::string EncoderInput::serialized() const { return text::join(tokens, " "); }

EncoderInput build_encoder_input(const corpus::DialogSample& sample,
                                 const corpus::Document& doc, int history_len) {
  if (history_len < 1) throw ValidationError("build_encoder_input: history length must be >= 1");
  if (sample.turns.empty())
    throw ValidationError("build_encoder_input: sample " + sample.sample_id + " has no turns");

  EncoderInput in;
  in.sample_id = sample.sample_id;
  in.doc_id = doc.doc_id;

  auto push_words = [&](const std::string& s) {
    std::istringstream ss(s);
    std::string w;
    while (ss >> w) in.tokens.push_back(w);
  };

  in.tokens.push_back("[CLS]");
  in.cls_positions.push_back(0);
  in.spans.push_back(doc.topic);

  // current turn plus the l most recent predecessors, newest first
  const int total = static_cast<int>(sample.turns.size());
  const int keep = std::min(total, history_len + 1);
  for (int i = 0; i < keep; ++i) {
    const auto& turn = sample.turns[static_cast<size_t>(total - 1 - i)];
    in.tokens.push_back(turn.role == corpus::Role::user ? "[USR]" : "[AGT]");
    push_words(turn.utterance);
    in.context_utterances.push_back(turn.utterance);
  }

  in.tokens.push_back("[SEP]");
  push_words(doc.topic);
  for (const auto& seg : doc.segments) {
    in.cls_positions.push_back(static_cast<int>(in.tokens.size()));
    in.tokens.push_back("[CLS]");
    push_words(seg.text);
    in.spans.push_back(seg.text);
  }
  in.tokens.push_back("[SEP]");
  return in;
}

VertexEmbeddings encode_vertices(const corpus::DialogSample& sample,
                                 const graph::CorefMDG& graph,
                                 const EmbeddingProvider& provider, int history_len) {
  const int M = graph.num_topics();
  const int N = graph.num_knowledge();
  if (M != static_cast<int>(sample.documents.size()))
    throw ValidationError("encode_vertices: graph/sample document count mismatch");

  VertexEmbeddings out;
  out.dim = provider.dim();
  out.matrix.resize(M + N, out.dim);

  int knl_row = M;
  for (int d = 0; d < M; ++d) {
    const auto& doc = sample.documents[static_cast<size_t>(d)];
    EncoderInput in = build_encoder_input(sample, doc, history_len);
    ProviderOutput enc = provider.encode(in);
    if (enc.vectors.rows() != static_cast<Eigen::Index>(in.cls_positions.size()))
      throw RuntimeFailure("provider returned " + std::to_string(enc.vectors.rows()) +
                           " vectors for " + std::to_string(in.cls_positions.size()) +
                           " cls positions (sample " + sample.sample_id + ", doc " +
                           doc.doc_id + ")");
    if (enc.vectors.cols() != out.dim)
      throw RuntimeFailure("provider dim mismatch: got " + std::to_string(enc.vectors.cols()) +
                           ", expected " + std::to_string(out.dim));
    out.any_truncated = out.any_truncated || enc.truncated;
    out.matrix.row(d) = enc.vectors.row(0);
    for (int j = 1; j < enc.vectors.rows(); ++j) out.matrix.row(knl_row++) = enc.vectors.row(j);
  }
  if (knl_row != M + N)
    throw RuntimeFailure("encode_vertices: knowledge row count mismatch");
  if (!out.matrix.allFinite())
    throw RuntimeFailure("encode_vertices: non-finite embedding for sample " + sample.sample_id);
  return out;
}

namespace {

class HashingFeaturizer final : public EmbeddingProvider {
 public:
  HashingFeaturizer(int dim, uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ < 1) throw ValidationError("hashing_featurizer: dim must be >= 1");
  }

  int dim() const override { return dim_; }

  std::string id() const override {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "hashing-featurizer/d%d/s%016llx", dim_,
                  static_cast<unsigned long long>(seed_));
    return buf;
  }

  ProviderOutput encode(const EncoderInput& input) const override {
    std::set<std::string> context_tokens;
    std::set<std::string> newest_tokens;
    for (size_t i = 0; i < input.context_utterances.size(); ++i) {
      for (const auto& t : text::tokenize(input.context_utterances[i])) {
        context_tokens.insert(t);
        if (i == 0) newest_tokens.insert(t);
      }
    }

    ProviderOutput out;
    out.vectors.resize(static_cast<Eigen::Index>(input.spans.size()), dim_);
    for (size_t s = 0; s < input.spans.size(); ++s) {
      out.vectors.row(static_cast<Eigen::Index>(s)) =
          embed_span(input.spans[s], context_tokens, newest_tokens);
    }
    return out;
  }

 private:
  Eigen::RowVectorXd embed_span(const std::string& span,
                                const std::set<std::string>& context_tokens,
                                const std::set<std::string>& newest_tokens) const {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(dim_);
    auto toks = text::tokenize(span);
    if (toks.empty()) return v;

    // interaction statistics in a fixed block (span/context lexical overlap)
    int ovl_ctx = 0, ovl_new = 0;
    for (const auto& t : toks) {
      if (context_tokens.count(t)) ++ovl_ctx;
      if (newest_tokens.count(t)) ++ovl_new;
    }
    const double n = static_cast<double>(toks.size());
    const int stats = std::min<int>(4, dim_);
    double stat_vals[4] = {static_cast<double>(ovl_ctx) / n,
                           static_cast<double>(ovl_new) / n,
                           ovl_ctx > 0 ? 1.0 : 0.0, ovl_new > 0 ? 1.0 : 0.0};
    for (int i = 0; i < stats; ++i) v(i) = 2.0 * stat_vals[i];

    if (dim_ > stats) {
      const int hdim = dim_ - stats;
      auto bucket = [&](const std::string& tok, const char* field, double w) {
        uint64_t h = fnv1a_str(tok, seed_ ^ fnv1a_str(field));
        int idx = stats + static_cast<int>(h % static_cast<uint64_t>(hdim));
        double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        v(idx) += sign * w;
      };
      for (const auto& t : toks) bucket(t, "span", 1.0);
      for (const auto& t : context_tokens) bucket(t, "ctx", 0.3);
    }

    double norm = v.norm();
    if (norm > 0) v /= norm;
    return v;
  }

  int dim_;
  uint64_t seed_;
};

class FileProvider final : public EmbeddingProvider {
 public:
  explicit FileProvider(const std::string& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("cannot open embedding file " + path);
    std::string line;
    if (!std::getline(in, line))
      throw ValidationError(path + ": empty embedding file");
    json header;
    try {
      header = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path + " header: " + e.what());
    }
    if (!header.contains("dim") || !header.contains("provider"))
      throw ValidationError(path + ": header must carry dim and provider");
    dim_ = header.at("dim").get<int>();
    provider_id_ = header.at("provider").get<std::string>();

    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
      Key key{j.at("sample").get<std::string>(), j.at("doc").get<std::string>(),
              j.at("cls").get<int>()};
      const auto& arr = j.at("vec");
      if (static_cast<int>(arr.size()) != dim_)
        throw ValidationError(path + ":" + std::to_string(lineno) + ": vector dim " +
                              std::to_string(arr.size()) + " != header dim " +
                              std::to_string(dim_));
      Eigen::VectorXd v(dim_);
      for (int i = 0; i < dim_; ++i) v(i) = arr.at(static_cast<size_t>(i)).get<double>();
      vectors_[key] = std::move(v);
    }
  }

  int dim() const override { return dim_; }
  std::string id() const override { return "file/" + provider_id_; }

  ProviderOutput encode(const EncoderInput& input) const override {
    ProviderOutput out;
    out.vectors.resize(static_cast<Eigen::Index>(input.cls_positions.size()), dim_);
    for (size_t c = 0; c < input.cls_positions.size(); ++c) {
      Key key{input.sample_id, input.doc_id, static_cast<int>(c)};
      auto it = vectors_.find(key);
      if (it == vectors_.end())
        throw RuntimeFailure("embedding file " + path_ + ": missing key (" + input.sample_id +
                             ", " + input.doc_id + ", " + std::to_string(c) + ")");
      out.vectors.row(static_cast<Eigen::Index>(c)) = it->second.transpose();
    }
    return out;
  }

 private:
  using Key = std::tuple<std::string, std::string, int>;
  std::string path_;
  int dim_ = 0;
  std::string provider_id_;
  std::map<Key, Eigen::VectorXd> vectors_;
};

}  // namespace

std::unique_ptr<EmbeddingProvider> hashing_featurizer(int dim, uint64_t seed) {
  return std::make_unique<HashingFeaturizer>(dim, seed);
}

std::unique_ptr<EmbeddingProvider> file_provider(const std::string& path) {
  return std::make_unique<FileProvider>(path);
}

void write_embedding_file(const std::string& path, int dim, const std::string& provider_id,
                          const std::vector<EmbeddingRecord>& records) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  ordered_json header;
  header["dim"] = dim;
  header["provider"] = provider_id;
  out << header.dump() << "\n";
  for (const auto& r : records) {
    if (r.vec.size() != dim)
      throw ValidationError("write_embedding_file: record dim " + std::to_string(r.vec.size()) +
                            " != " + std::to_string(dim));
    ordered_json j;
    j["sample"] = r.sample_id;
    j["doc"] = r.doc_id;
    j["cls"] = r.cls;
    j["vec"] = ordered_json::array();
    for (int i = 0; i < r.vec.size(); ++i) j["vec"].push_back(r.vec(i));
    out << j.dump() << "\n";
  }
}

}  // namespace corefdiffs::encoder
