#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "oransec/util.hpp"

namespace oransec::kb {

inline constexpr std::size_t kEmbeddingDim = 1024;

struct Mitigation {
  std::string mitigation_id;
  std::string name;
  std::string guidance;
};

struct FightTechnique {
  std::string technique_id;
  std::string name;
  std::string description;
  std::vector<std::string> tactic_ids;
  std::vector<Mitigation> mitigations;
  std::string source_version;
};

// `FGT` followed by digits, optionally `.digits`.
bool is_valid_technique_id(std::string_view id) noexcept;

class Corpus {
 public:
  Corpus() = default;
  // Validates every invariant of the technique records; throws SchemaViolation
  // or DuplicateTechniqueId.
  Corpus(std::string version, std::vector<FightTechnique> techniques);

  const std::string& version() const noexcept { return version_; }
  const std::vector<FightTechnique>& techniques() const noexcept { return techniques_; }
  std::size_t size() const noexcept { return techniques_.size(); }
  bool empty() const noexcept { return techniques_.empty(); }
  bool contains(std::string_view id) const;

  const FightTechnique& get_technique(std::string_view id) const;
  const std::vector<Mitigation>& get_mitigations(std::string_view id) const;

 private:
  std::string version_;
  std::vector<FightTechnique> techniques_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

Corpus parse_corpus(const Json& doc);
Corpus load_corpus(const std::filesystem::path& path);
Json to_json(const Corpus& corpus);

// Text that represents a technique in the index.
std::string index_document_text(const FightTechnique& technique);

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::vector<std::string> words);
  static StopwordList load(const std::filesystem::path& path);

  bool contains(std::string_view token) const;
  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_set<std::string> lookup_;
};

// Lowercased maximal runs of ASCII alphanumerics, stopwords removed.
std::vector<std::string> tokenize(std::string_view text, const StopwordList& stopwords);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
class IdfTable {
 public:
  IdfTable() = default;
  IdfTable(std::size_t doc_count, std::unordered_map<std::string, std::size_t> doc_freq);
  static IdfTable fit(const std::vector<std::vector<std::string>>& tokenized_docs);

  double idf(const std::string& token) const;
  std::size_t doc_count() const noexcept { return doc_count_; }
  const std::unordered_map<std::string, std::size_t>& doc_freq() const noexcept {
    return doc_freq_;
  }

 private:
  std::size_t doc_count_ = 0;
  std::unordered_map<std::string, std::size_t> doc_freq_;
};

using EmbeddingVector = std::vector<double>;

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double l2_norm(const EmbeddingVector& v);
bool is_zero(const EmbeddingVector& v);

// Text → fixed-dimension vector. Implementations must be deterministic and
// safe for concurrent calls.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
};

// Feature-hashed TF-IDF. Each token lands in bucket `fnv1a64 % dim` with sign
// negative when bit 63 of the hash is set; the result is L2-normalized.
class LexicalEmbedder final : public EmbeddingBackend {
 public:
  LexicalEmbedder(StopwordList stopwords, IdfTable idf, std::size_t dim = kEmbeddingDim);

  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const override { return dim_; }
  std::string name() const override { return "lexical-tfidf-fnv1a"; }

  const StopwordList& stopwords() const noexcept { return stopwords_; }
  const IdfTable& idf_table() const noexcept { return idf_; }

 private:
  StopwordList stopwords_;
  IdfTable idf_;
  std::size_t dim_;
};

struct IndexEntry {
  std::string technique_id;
  EmbeddingVector vector;
};

struct RetrievalResult {
  std::string technique_id;
  double score = 0.0;
  int rank = 0;  // 1-based
};

// Immutable after construction; concurrent search is safe.
class VectorIndex {
 public:
  VectorIndex(std::string corpus_version, std::vector<IndexEntry> entries,
              std::shared_ptr<const EmbeddingBackend> embedder);

  std::size_t dimension() const noexcept { return embedder_->dimension(); }
  const std::string& corpus_version() const noexcept { return corpus_version_; }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const EmbeddingBackend& embedder() const noexcept { return *embedder_; }
  std::shared_ptr<const EmbeddingBackend> embedder_ptr() const noexcept { return embedder_; }

  EmbeddingVector embed_query(std::string_view query) const { return embedder_->embed(query); }

 private:
  std::string corpus_version_;
  std::vector<IndexEntry> entries_;
  std::shared_ptr<const EmbeddingBackend> embedder_;
};

// Fits the lexical embedder's IDF table on the corpus, then embeds every
// technique. Throws EmptyCorpus.
VectorIndex build_index(const Corpus& corpus, const StopwordList& stopwords);
VectorIndex build_index(const Corpus& corpus, std::shared_ptr<const EmbeddingBackend> embedder);

// Descending score, ties by ascending technique_id, min(k, |index|) results.
// Throws EmptyIndex; k == 0 is treated as a caller error (InvalidRequest).
std::vector<RetrievalResult> search(const VectorIndex& index, std::string_view query,
                                    std::size_t k);

// Persisted form of a lexical index: stopwords, IDF statistics and vectors.
Json index_to_json(const VectorIndex& index);
VectorIndex index_from_json(const Json& doc);

// Corpus plus its index; the read surface behind the MITRE tools.
class KnowledgeBase {
 public:
  KnowledgeBase(Corpus corpus, const StopwordList& stopwords);
  KnowledgeBase(Corpus corpus, VectorIndex index);

  const Corpus& corpus() const noexcept { return corpus_; }
  const VectorIndex& index() const noexcept { return index_; }

  std::vector<RetrievalResult> search(std::string_view query, std::size_t k) const {
    return kb::search(index_, query, k);
  }
  const FightTechnique& get_technique(std::string_view id) const {
    return corpus_.get_technique(id);
  }
  const std::vector<Mitigation>& get_mitigations(std::string_view id) const {
    return corpus_.get_mitigations(id);
  }

 private:
  Corpus corpus_;
  VectorIndex index_;
};

Json to_json(const FightTechnique& technique);
Json to_json(const Mitigation& mitigation);
Json to_json(const RetrievalResult& result);

}  // namespace oransec::kb
