#pragma once

// Character-trigram TF-IDF vectors and cosine similarity for fuzzy name
// matching.
//
// Scheme: raw trigram counts, smoothed IDF ln((1+N)/(1+df)) + 1, L2
// normalization. Names are normalized and padded with one space on each side
// so that short tokens still yield trigrams.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nomscreen/common.hpp"

namespace nomscreen {

// lowercase, ASCII punctuation -> space, collapse whitespace, pad.
inline std::string normalize_name(std::string_view raw) {
    std::string t;
    t.reserve(raw.size() + 2);
    for (char ch : raw) {
        auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && !std::isalnum(c)) t.push_back(' ');
        else t.push_back(static_cast<char>(std::tolower(c)));
    }
    auto collapsed = str::collapse_ws(t);
    return " " + collapsed + " ";
}

inline std::vector<std::string> trigrams(std::string_view normalized) {
    std::vector<std::string> out;
    if (normalized.size() < 3) return out;
    for (size_t i = 0; i + 3 <= normalized.size(); ++i) out.emplace_back(normalized.substr(i, 3));
    return out;
}

// Sparse vector sorted by trigram index.
struct TrigramVector {
    std::vector<std::pair<uint32_t, double>> entries;
    bool empty() const { return entries.empty(); }
};

class TrigramVocabulary {
public:
    static TrigramVocabulary fit(const std::vector<std::string>& names) {
        if (names.empty()) throw Error("cannot fit a trigram vocabulary on no names");
        TrigramVocabulary v;
        v.n_documents_ = names.size();
        std::set<std::string> all;
        std::vector<std::set<std::string>> per_doc;
        per_doc.reserve(names.size());
        for (const auto& n : names) {
            auto tg = trigrams(normalize_name(n));
            per_doc.emplace_back(tg.begin(), tg.end());
            all.insert(tg.begin(), tg.end());
        }
        // Dense indices in lexicographic trigram order.
        for (const auto& t : all) {
            v.index_.emplace(t, static_cast<uint32_t>(v.terms_.size()));
            v.terms_.push_back(t);
        }
        v.df_.assign(v.terms_.size(), 0);
        for (const auto& doc : per_doc)
            for (const auto& t : doc) ++v.df_[v.index_.at(t)];
        v.idf_.resize(v.terms_.size());
        for (size_t i = 0; i < v.terms_.size(); ++i)
            v.idf_[i] = std::log((1.0 + static_cast<double>(v.n_documents_)) / (1.0 + static_cast<double>(v.df_[i]))) + 1.0;
        return v;
    }

    // Trigrams outside the vocabulary are ignored.
    TrigramVector vectorize(std::string_view name) const {
        std::unordered_map<uint32_t, double> counts;
        for (const auto& t : trigrams(normalize_name(name))) {
            auto it = index_.find(t);
            if (it != index_.end()) counts[it->second] += 1.0;
        }
        TrigramVector v;
        v.entries.assign(counts.begin(), counts.end());
        std::sort(v.entries.begin(), v.entries.end());
        double norm = 0;
        for (auto& [i, w] : v.entries) {
            w *= idf_[i];
            norm += w * w;
        }
        norm = std::sqrt(norm);
        if (norm > 0)
            for (auto& [i, w] : v.entries) w /= norm;
        return v;
    }

    size_t size() const { return terms_.size(); }
    size_t n_documents() const { return n_documents_; }
    std::optional<uint32_t> index_of(const std::string& trigram) const {
        auto it = index_.find(trigram);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    size_t document_frequency(uint32_t index) const { return df_.at(index); }
    double idf(uint32_t index) const { return idf_.at(index); }
    const std::vector<std::string>& terms() const { return terms_; }

private:
    std::unordered_map<std::string, uint32_t> index_;
    std::vector<std::string> terms_;
    std::vector<size_t> df_;
    std::vector<double> idf_;
    size_t n_documents_ = 0;
};

inline double cosine(const TrigramVector& a, const TrigramVector& b) {
    if (a.empty() || b.empty()) return 0.0;
    double dot = 0;
    auto ia = a.entries.begin(), ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
        if (ia->first < ib->first) ++ia;
        else if (ib->first < ia->first) ++ib;
        else {
            dot += ia->second * ib->second;
            ++ia;
            ++ib;
        }
    }
    return std::clamp(dot, 0.0, 1.0);
}

struct NameMatch {
    std::string query;
    std::string target;
    double similarity = 0;
    friend bool operator==(const NameMatch&, const NameMatch&) = default;
};

// Orders by descending similarity, then (query, target).
inline bool match_order(const NameMatch& a, const NameMatch& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return std::tie(a.query, a.target) < std::tie(b.query, b.target);
}

// All (query, target) pairs at or above threshold, scored with a vocabulary
// fitted on the supplied names. Uses an inverted index over target trigrams;
// the per-pair sum runs in ascending trigram order, exactly as cosine() does.
inline std::vector<NameMatch> match_names(const TrigramVocabulary& vocab, const std::vector<std::string>& queries,
                                          const std::vector<std::string>& targets, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("threshold must be in (0, 1]");
    std::set<std::string> uq(queries.begin(), queries.end()), ut(targets.begin(), targets.end());
    std::vector<std::string> q(uq.begin(), uq.end()), t(ut.begin(), ut.end());
    std::vector<TrigramVector> tv;
    tv.reserve(t.size());
    for (const auto& name : t) tv.push_back(vocab.vectorize(name));
    std::vector<std::vector<std::pair<uint32_t, double>>> postings(vocab.size());
    for (uint32_t j = 0; j < tv.size(); ++j)
        for (const auto& [i, w] : tv[j].entries) postings[i].push_back({j, w});

    std::vector<NameMatch> out;
    std::vector<double> acc(t.size(), 0.0);
    std::vector<uint32_t> touched;
    for (const auto& name : q) {
        auto qv = vocab.vectorize(name);
        touched.clear();
        for (const auto& [i, w] : qv.entries) {
            for (const auto& [j, tw] : postings[i]) {
                if (acc[j] == 0.0) touched.push_back(j);
                acc[j] += w * tw;
            }
        }
        for (auto j : touched) {
            double s = std::clamp(acc[j], 0.0, 1.0);
            if (s >= threshold) out.push_back({name, t[j], s});
            acc[j] = 0.0;
        }
    }
    std::sort(out.begin(), out.end(), match_order);
    return out;
}

inline std::vector<NameMatch> match_names(const std::vector<std::string>& queries,
                                          const std::vector<std::string>& targets, double threshold = 0.90) {
    std::vector<std::string> all(queries);
    all.insert(all.end(), targets.begin(), targets.end());
    if (all.empty()) return {};
    return match_names(TrigramVocabulary::fit(all), queries, targets, threshold);
}

} // namespace nomscreen
