#include "oransec/kb.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "oransec/error.hpp"

namespace oransec::kb {

namespace {

[[noreturn]] void schema_error(std::size_t index, std::string_view field, std::string_view what) {
  std::ostringstream msg;
  msg << "techniques[" << index << "]." << field << ": " << what;
  throw Error(ErrorCode::SchemaViolation, msg.str());
}

std::string require_string(const Json& obj, std::size_t index, const char* field,
                           bool non_empty) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) schema_error(index, field, "missing or not a string");
  std::string value = it->get<std::string>();
  if (non_empty && value.empty()) schema_error(index, field, "must be non-empty");
  return value;
}

bool is_alnum_ascii(char c) noexcept {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

}  // namespace

bool is_valid_technique_id(std::string_view id) noexcept {
  if (id.size() < 4 || id.substr(0, 3) != "FGT") return false;
  std::size_t i = 3;
  auto digits = [&] {
    const std::size_t start = i;
    while (i < id.size() && id[i] >= '0' && id[i] <= '9') ++i;
    return i > start;
  };
  if (!digits()) return false;
  if (i == id.size()) return true;
  if (id[i] != '.') return false;
  ++i;
  return digits() && i == id.size();
}

Corpus::Corpus(std::string version, std::vector<FightTechnique> techniques)
    : version_(std::move(version)), techniques_(std::move(techniques)) {
  for (std::size_t i = 0; i < techniques_.size(); ++i) {
    auto& t = techniques_[i];
    if (!is_valid_technique_id(t.technique_id)) schema_error(i, "technique_id", "malformed id");
    if (t.description.empty()) schema_error(i, "description", "must be non-empty");
    for (std::size_t m = 0; m < t.mitigations.size(); ++m) {
      const auto& mit = t.mitigations[m];
      if (mit.mitigation_id.empty()) {
        schema_error(i, "mitigations[" + std::to_string(m) + "].mitigation_id", "must be non-empty");
      }
      if (mit.guidance.empty()) {
        schema_error(i, "mitigations[" + std::to_string(m) + "].guidance", "must be non-empty");
      }
    }
    if (t.source_version.empty()) t.source_version = version_;
    if (!by_id_.emplace(t.technique_id, i).second) {
      throw Error(ErrorCode::DuplicateTechniqueId, "duplicate technique id " + t.technique_id);
    }
  }
}

bool Corpus::contains(std::string_view id) const { return by_id_.count(std::string(id)) != 0; }

const FightTechnique& Corpus::get_technique(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) {
    throw Error(ErrorCode::UnknownTechniqueId, "unknown technique " + std::string(id));
  }
  return techniques_[it->second];
}

const std::vector<Mitigation>& Corpus::get_mitigations(std::string_view id) const {
  return get_technique(id).mitigations;
}

Corpus parse_corpus(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "corpus root must be an object");
  auto version_it = doc.find("version");
  if (version_it == doc.end() || !version_it->is_string()) {
    throw Error(ErrorCode::SchemaViolation, "corpus.version missing or not a string");
  }
  auto list_it = doc.find("techniques");
  if (list_it == doc.end() || !list_it->is_array()) {
    throw Error(ErrorCode::SchemaViolation, "corpus.techniques missing or not an array");
  }
  const std::string version = version_it->get<std::string>();

  std::vector<FightTechnique> techniques;
  techniques.reserve(list_it->size());
  for (std::size_t i = 0; i < list_it->size(); ++i) {
    const Json& rec = (*list_it)[i];
    if (!rec.is_object()) schema_error(i, "(record)", "not an object");
    FightTechnique t;
    t.technique_id = require_string(rec, i, "technique_id", true);
    t.name = require_string(rec, i, "name", false);
    t.description = require_string(rec, i, "description", true);
    auto tactics = rec.find("tactic_ids");
    if (tactics == rec.end() || !tactics->is_array()) schema_error(i, "tactic_ids", "not an array");
    for (const auto& tac : *tactics) {
      if (!tac.is_string()) schema_error(i, "tactic_ids", "entries must be strings");
      t.tactic_ids.push_back(tac.get<std::string>());
    }
    auto mits = rec.find("mitigations");
    if (mits == rec.end() || !mits->is_array()) schema_error(i, "mitigations", "not an array");
    for (std::size_t m = 0; m < mits->size(); ++m) {
      const Json& mj = (*mits)[m];
      const std::string prefix = "mitigations[" + std::to_string(m) + "]";
      if (!mj.is_object()) schema_error(i, prefix, "not an object");
      Mitigation mit;
      mit.mitigation_id = require_string(mj, i, "mitigation_id", true);
      mit.name = require_string(mj, i, "name", false);
      mit.guidance = require_string(mj, i, "guidance", true);
      t.mitigations.push_back(std::move(mit));
    }
    t.source_version = version;
    techniques.push_back(std::move(t));
  }
  return Corpus(version, std::move(techniques));
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_json_file(path)); }

Json to_json(const Mitigation& m) {
  return Json{{"mitigation_id", m.mitigation_id}, {"name", m.name}, {"guidance", m.guidance}};
}

Json to_json(const FightTechnique& t) {
  Json mits = Json::array();
  for (const auto& m : t.mitigations) mits.push_back(to_json(m));
  return Json{{"technique_id", t.technique_id}, {"name", t.name},
              {"description", t.description}, {"tactic_ids", t.tactic_ids},
              {"mitigations", mits}, {"source_version", t.source_version}};
}

Json to_json(const Corpus& corpus) {
  Json list = Json::array();
  for (const auto& t : corpus.techniques()) {
    Json j = to_json(t);
    j.erase("source_version");
    list.push_back(std::move(j));
  }
  return Json{{"version", corpus.version()}, {"techniques", list}};
}

Json to_json(const RetrievalResult& r) {
  return Json{{"technique_id", r.technique_id}, {"score", r.score}, {"rank", r.rank}};
}

std::string index_document_text(const FightTechnique& technique) {
  return technique.name + " " + technique.description;
}

StopwordList::StopwordList(std::vector<std::string> words) : words_(std::move(words)) {
  for (const auto& w : words_) lookup_.insert(w);
}

StopwordList StopwordList::load(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.push_back(to_lower_ascii(line));
  }
  return StopwordList(std::move(words));
}

bool StopwordList::contains(std::string_view token) const {
  return lookup_.count(std::string(token)) != 0;
}

std::vector<std::string> tokenize(std::string_view text, const StopwordList& stopwords) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_alnum_ascii(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_alnum_ascii(text[i])) ++i;
    if (i > start) {
      std::string token = to_lower_ascii(text.substr(start, i - start));
      if (!stopwords.contains(token)) tokens.push_back(std::move(token));
    }
  }
  return tokens;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

IdfTable::IdfTable(std::size_t doc_count, std::unordered_map<std::string, std::size_t> doc_freq)
    : doc_count_(doc_count), doc_freq_(std::move(doc_freq)) {}

IdfTable IdfTable::fit(const std::vector<std::vector<std::string>>& tokenized_docs) {
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : tokenized_docs) {
    std::unordered_set<std::string> seen(doc.begin(), doc.end());
    for (const auto& tok : seen) ++df[tok];
  }
  return IdfTable(tokenized_docs.size(), std::move(df));
}

double IdfTable::idf(const std::string& token) const {
  auto it = doc_freq_.find(token);
  const double df = it == doc_freq_.end() ? 0.0 : static_cast<double>(it->second);
  const double n = static_cast<double>(doc_count_);
  return std::log((1.0 + n) / (1.0 + df)) + 1.0;
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

bool is_zero(const EmbeddingVector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

LexicalEmbedder::LexicalEmbedder(StopwordList stopwords, IdfTable idf, std::size_t dim)
    : stopwords_(std::move(stopwords)), idf_(std::move(idf)), dim_(dim) {}

EmbeddingVector LexicalEmbedder::embed(std::string_view text) const {
  EmbeddingVector out(dim_, 0.0);
  // Ordered map so bucket accumulation order is fixed across runs.
  std::map<std::string, int> counts;
  for (auto& tok : tokenize(text, stopwords_)) ++counts[tok];
  for (const auto& [token, tf] : counts) {
    const std::uint64_t h = fnv1a64(token);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    out[h % dim_] += sign * static_cast<double>(tf) * idf_.idf(token);
  }
  const double norm = l2_norm(out);
  if (norm > 0.0) {
    for (double& x : out) x /= norm;
  }
  return out;
}

VectorIndex::VectorIndex(std::string corpus_version, std::vector<IndexEntry> entries,
                         std::shared_ptr<const EmbeddingBackend> embedder)
    : corpus_version_(std::move(corpus_version)),
      entries_(std::move(entries)),
      embedder_(std::move(embedder)) {}

VectorIndex build_index(const Corpus& corpus, std::shared_ptr<const EmbeddingBackend> embedder) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
  std::vector<IndexEntry> entries;
  entries.reserve(corpus.size());
  for (const auto& t : corpus.techniques()) {
    entries.push_back({t.technique_id, embedder->embed(index_document_text(t))});
  }
  return VectorIndex(corpus.version(), std::move(entries), std::move(embedder));
}

VectorIndex build_index(const Corpus& corpus, const StopwordList& stopwords) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  for (const auto& t : corpus.techniques()) {
    docs.push_back(tokenize(index_document_text(t), stopwords));
  }
  auto embedder =
      std::make_shared<const LexicalEmbedder>(stopwords, IdfTable::fit(docs), kEmbeddingDim);
  return build_index(corpus, std::move(embedder));
}

std::vector<RetrievalResult> search(const VectorIndex& index, std::string_view query,
                                    std::size_t k) {
  if (index.empty()) throw Error(ErrorCode::EmptyIndex, "index has no entries");
  if (k == 0) throw Error(ErrorCode::InvalidRequest, "k must be >= 1");
  const EmbeddingVector q = index.embed_query(query);
  std::vector<RetrievalResult> scored;
  scored.reserve(index.size());
  for (const auto& entry : index.entries()) {
    scored.push_back({entry.technique_id, dot(q, entry.vector), 0});
  }
  auto better = [](const RetrievalResult& a, const RetrievalResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.technique_id < b.technique_id;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    better);
  scored.resize(n);
  for (std::size_t i = 0; i < n; ++i) scored[i].rank = static_cast<int>(i + 1);
  return scored;
}

Json index_to_json(const VectorIndex& index) {
  const auto* lexical = dynamic_cast<const LexicalEmbedder*>(&index.embedder());
  if (lexical == nullptr) {
    throw Error(ErrorCode::InvalidRequest, "only lexical indexes can be persisted");
  }
  // Sorted for a stable file layout.
  std::map<std::string, std::size_t> df(lexical->idf_table().doc_freq().begin(),
                                        lexical->idf_table().doc_freq().end());
  Json entries = Json::array();
  for (const auto& e : index.entries()) {
    entries.push_back(Json{{"technique_id", e.technique_id}, {"values", e.vector}});
  }
  return Json{{"format", "oransec-index/1"},
              {"embedder", lexical->name()},
              {"corpus_version", index.corpus_version()},
              {"dimension", index.dimension()},
              {"stopwords", lexical->stopwords().words()},
              {"doc_count", lexical->idf_table().doc_count()},
              {"doc_freq", df},
              {"entries", entries}};
}

VectorIndex index_from_json(const Json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "oransec-index/1") {
      throw Error(ErrorCode::SchemaViolation, "unsupported index format");
    }
    const auto dim = doc.at("dimension").get<std::size_t>();
    StopwordList stopwords(doc.at("stopwords").get<std::vector<std::string>>());
    auto df = doc.at("doc_freq").get<std::map<std::string, std::size_t>>();
    IdfTable idf(doc.at("doc_count").get<std::size_t>(),
                 std::unordered_map<std::string, std::size_t>(df.begin(), df.end()));
    std::vector<IndexEntry> entries;
    for (const auto& e : doc.at("entries")) {
      IndexEntry entry{e.at("technique_id").get<std::string>(),
                       e.at("values").get<std::vector<double>>()};
      if (entry.vector.size() != dim) {
        throw Error(ErrorCode::SchemaViolation, "entry " + entry.technique_id + " has wrong dimension");
      }
      entries.push_back(std::move(entry));
    }
    auto embedder = std::make_shared<const LexicalEmbedder>(std::move(stopwords), std::move(idf), dim);
    return VectorIndex(doc.at("corpus_version").get<std::string>(), std::move(entries),
                       std::move(embedder));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("index file: ") + e.what());
  }
}

KnowledgeBase::KnowledgeBase(Corpus corpus, const StopwordList& stopwords)
    : corpus_(std::move(corpus)), index_(build_index(corpus_, stopwords)) {}

KnowledgeBase::KnowledgeBase(Corpus corpus, VectorIndex index)
    : corpus_(std::move(corpus)), index_(std::move(index)) {}

}  // namespace oransec::kb
