#pragma once

// Straight-line re-implementation of the lexical retrieval path, written from
// the embedding definition rather than from the library code. It reads the
// corpus and stopword files itself and scores by exhaustive cosine.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace oracle {

struct Ranked {
  std::string id;
  double score;
};

class LexicalOracle {
 public:
  LexicalOracle(const std::filesystem::path& corpus_file, const std::filesystem::path& stopword_file) {
    std::ifstream sw(stopword_file);
    std::string w;
    while (sw >> w) {
      for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      stop_.insert(w);
    }
    const auto corpus = nlohmann::json::parse(std::ifstream(corpus_file));
    for (const auto& t : corpus.at("techniques")) {
      ids_.push_back(t.at("technique_id").get<std::string>());
      texts_.push_back(t.at("name").get<std::string>() + " " + t.at("description").get<std::string>());
    }
    for (const auto& text : texts_) {
      const auto toks = tokens(text);
      for (const auto& tok : std::set<std::string>(toks.begin(), toks.end())) ++df_[tok];
    }
    for (const auto& text : texts_) docs_.push_back(vectorize(text));
  }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<std::string>& texts() const { return texts_; }

  std::vector<std::string> tokens(const std::string& text) const {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty() && !stop_.count(cur)) out.push_back(cur);
      cur.clear();
    };
    for (unsigned char c : text) {
      const bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
      if (alnum) {
        cur += static_cast<char>(std::tolower(c));
      } else {
        flush();
      }
    }
    flush();
    return out;
  }

  static std::uint64_t fnv(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  // Sparse signed-hash TF-IDF, unnormalized.
  std::map<std::size_t, double> vectorize(const std::string& text) const {
    std::map<std::string, int> tf;
    for (const auto& t : tokens(text)) ++tf[t];
    const double n = static_cast<double>(texts_.size());
    std::map<std::size_t, double> v;
    for (const auto& [term, count] : tf) {
      const auto it = df_.find(term);
      const double df = it == df_.end() ? 0.0 : it->second;
      const double weight = count * (std::log((1.0 + n) / (1.0 + df)) + 1.0);
      const auto h = fnv(term);
      v[h % 1024] += (h >> 63) ? -weight : weight;
    }
    return v;
  }

  static double cosine(const std::map<std::size_t, double>& a, const std::map<std::size_t, double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (const auto& [k, x] : a) {
      aa += x * x;
      const auto it = b.find(k);
      if (it != b.end()) ab += x * it->second;
    }
    for (const auto& [k, y] : b) bb += y * y;
    if (aa == 0 || bb == 0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
  }

  // Full ranking: score descending; scores within 1e-12 count as tied and
  // fall back to ascending id.
  std::vector<Ranked> rank(const std::string& query) const {
    const auto q = vectorize(query);
    std::vector<Ranked> out;
    for (std::size_t i = 0; i < ids_.size(); ++i) out.push_back({ids_[i], cosine(q, docs_[i])});
    std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
      if (std::abs(a.score - b.score) > 1e-12) return a.score > b.score;
      return a.id < b.id;
    });
    return out;
  }

 private:
  std::set<std::string> stop_;
  std::vector<std::string> ids_;
  std::vector<std::string> texts_;
  std::map<std::string, int> df_;
  std::vector<std::map<std::size_t, double>> docs_;
};

// Queries mixing corpus vocabulary, stopwords, unseen words, case and
// punctuation, plus a few that repeat a single term.
inline std::vector<std::string> generate_queries(const LexicalOracle& o, std::size_t n, unsigned seed) {
  std::vector<std::string> vocab;
  for (const auto& text : o.texts()) {
    for (const auto& t : o.tokens(text)) vocab.push_back(t);
  }
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  const std::vector<std::string> noise{"the", "of", "and", "zzqx", "rrc", "UE", "5G", "nea0", "---", "Attack!"};
  std::mt19937 rng(seed);
  std::vector<std::string> out;
  while (out.size() < n) {
    const auto len = std::uniform_int_distribution<int>(1, 8)(rng);
    std::string q;
    for (int i = 0; i < len; ++i) {
      std::string w = (rng() % 4 == 0) ? noise[rng() % noise.size()] : vocab[rng() % vocab.size()];
      if (rng() % 5 == 0) std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::toupper(c); });
      q += (i ? (rng() % 3 == 0 ? ", " : " ") : "") + w;
    }
    if (out.size() % 10 == 9) q = q + " " + q;
    out.push_back(q);
  }
  return out;
}

}  // namespace oracle
