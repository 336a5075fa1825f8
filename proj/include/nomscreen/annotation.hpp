#pragma once

// Human annotation of flagged directors: seeded sampling, dual-coder
// reconciliation, an append-only JSON-lines event log, count extraction and
// the request-level service behind the HTTP API.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nomscreen/common.hpp"
#include "nomscreen/estimator.hpp"

namespace nomscreen {

struct AnnotationRecord {
    std::string director_id;
    std::string coder_id;
    int score = 0;
    std::optional<std::string> notes;
    std::string timestamp;  // ISO-8601 UTC
    Source source = Source::NN;

    nlohmann::json to_json() const {
        nlohmann::json j{{"director_id", director_id}, {"coder_id", coder_id}, {"score", score},
                         {"timestamp", timestamp},     {"source", to_string(source)}};
        j["notes"] = notes ? nlohmann::json(*notes) : nlohmann::json(nullptr);
        return j;
    }

    static AnnotationRecord from_json(const nlohmann::json& j) {
        AnnotationRecord r;
        r.director_id = j.at("director_id").get<std::string>();
        r.coder_id = j.at("coder_id").get<std::string>();
        r.score = j.at("score").get<int>();
        if (j.contains("notes") && !j.at("notes").is_null()) r.notes = j.at("notes").get<std::string>();
        r.timestamp = j.value("timestamp", "");
        r.source = parse_source(j.value("source", "nn"));
        r.validate();
        return r;
    }

    void validate() const {
        if (director_id.empty()) throw Error("annotation without director_id");
        if (coder_id.empty()) throw Error("annotation without coder_id");
        if (score < 1 || score > 5) throw Error("score must be in 1..5");
    }
};

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

enum class Label { CSP, NonCSP, Unknown, Pending };

inline const char* to_string(Label l) {
    switch (l) {
    case Label::CSP: return "CSP";
    case Label::NonCSP: return "NonCSP";
    case Label::Unknown: return "Unknown";
    case Label::Pending: return "Pending";
    }
    return "";
}

// Both in {4,5} -> CSP; both in {1,2} -> NonCSP; anything touching or
// spanning 3 -> Unknown.
inline Label reconcile(int a, int b) {
    if (a < 1 || a > 5 || b < 1 || b > 5) throw Error("score must be in 1..5");
    if (a >= 4 && b >= 4) return Label::CSP;
    if (a <= 2 && b <= 2) return Label::NonCSP;
    return Label::Unknown;
}

inline Label reconcile(std::optional<int> a, std::optional<int> b) {
    if (!a || !b) return Label::Pending;
    return reconcile(*a, *b);
}

struct SampleResult {
    std::vector<std::string> queue;
    bool short_population = false;  // fewer candidates than requested
};

// Uniform sample without replacement, in draw order. Candidates are sorted
// first so the queue depends only on the set and the seed.
inline SampleResult sample_for_annotation(std::vector<std::string> candidates, size_t n, uint64_t seed) {
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    SampleResult r;
    r.short_population = candidates.size() < n;
    n = std::min(n, candidates.size());
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<size_t> pick(i, candidates.size() - 1);
        std::swap(candidates[i], candidates[pick(rng)]);
    }
    candidates.resize(n);
    r.queue = std::move(candidates);
    return r;
}

// Logit candidates: above threshold, not kNN-flagged, not licensed.
inline std::vector<std::string> logit_candidates(const std::vector<std::string>& above_threshold,
                                                 const std::set<std::string>& knn_flagged,
                                                 const std::set<std::string>& licensed) {
    std::vector<std::string> out;
    for (const auto& d : above_threshold)
        if (!knn_flagged.count(d) && !licensed.count(d)) out.push_back(d);
    return out;
}

// Latest score per (director, coder); replaying a log rebuilds it exactly.
class AnnotationState {
public:
    void apply(const AnnotationRecord& r) {
        r.validate();
        scores_[r.director_id][r.coder_id] = r;
    }

    std::optional<AnnotationRecord> get(const std::string& director, const std::string& coder) const {
        auto it = scores_.find(director);
        if (it == scores_.end()) return std::nullopt;
        auto jt = it->second.find(coder);
        if (jt == it->second.end()) return std::nullopt;
        return jt->second;
    }

    // Two coders required unless single_coder (then the first doubles as second).
    Label label(const std::string& director, bool single_coder = false) const {
        auto it = scores_.find(director);
        if (it == scores_.end() || it->second.empty()) return Label::Pending;
        const auto& by_coder = it->second;  // ordered by coder id
        auto first = by_coder.begin();
        if (by_coder.size() == 1) return single_coder ? reconcile(first->second.score, first->second.score) : Label::Pending;
        auto second = std::next(first);
        return reconcile(first->second.score, second->second.score);
    }

    const std::map<std::string, std::map<std::string, AnnotationRecord>>& scores() const { return scores_; }

    friend bool operator==(const AnnotationState& a, const AnnotationState& b) {
        if (a.scores_.size() != b.scores_.size()) return false;
        for (const auto& [d, m] : a.scores_) {
            auto it = b.scores_.find(d);
            if (it == b.scores_.end() || it->second.size() != m.size()) return false;
            for (const auto& [c, r] : m) {
                auto jt = it->second.find(c);
                if (jt == it->second.end() || jt->second.to_json() != r.to_json()) return false;
            }
        }
        return true;
    }

private:
    std::map<std::string, std::map<std::string, AnnotationRecord>> scores_;
};

// TP = CSP, Unknown = Unknown, FP = the rest. Pending labels are an error.
inline AnnotationCounts counts(const std::vector<std::pair<std::string, Label>>& labels, size_t n_candidates,
                               Source source) {
    AnnotationCounts c;
    c.n_candidates = n_candidates;
    c.source = source;
    std::vector<std::string> pending;
    for (const auto& [d, l] : labels) {
        switch (l) {
        case Label::CSP: ++c.tp; break;
        case Label::Unknown: ++c.unknown; break;
        case Label::NonCSP: ++c.fp; break;
        case Label::Pending: pending.push_back(d); break;
        }
    }
    if (!pending.empty()) {
        std::string msg = "pending labels:";
        for (const auto& d : pending) msg += " " + d;
        throw Error(msg);
    }
    return c;
}

// Append-only JSON-lines log. Writers are serialized; readers take a shared lock.
class AnnotationLog {
public:
    AnnotationLog() = default;
    explicit AnnotationLog(std::string path) : path_(std::move(path)) {
        std::ifstream in(path_);
        if (in) for (const auto& r : replay(in)) state_.apply(r);
    }

    static std::vector<AnnotationRecord> replay(std::istream& in) {
        std::vector<AnnotationRecord> out;
        std::string line;
        size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (str::trim(line).empty()) continue;
            try {
                out.push_back(AnnotationRecord::from_json(nlohmann::json::parse(line)));
            } catch (const std::exception& e) {
                throw Error("annotation log line " + std::to_string(n) + ": " + e.what());
            }
        }
        return out;
    }

    AnnotationRecord append(AnnotationRecord r) {
        if (r.timestamp.empty()) r.timestamp = utc_timestamp();
        r.validate();
        std::unique_lock lock(mutex_);
        if (!path_.empty()) {
            std::ofstream out(path_, std::ios::app);
            if (!out) throw Error("cannot open annotation log: " + path_);
            out << r.to_json().dump() << '\n';
            out.flush();
            if (!out) throw Error("failed to append to annotation log: " + path_);
        }
        events_.push_back(r);
        state_.apply(r);
        return r;
    }

    AnnotationState snapshot() const {
        std::shared_lock lock(mutex_);
        return state_;
    }

    std::vector<AnnotationRecord> events() const {
        std::shared_lock lock(mutex_);
        return events_;
    }

private:
    std::string path_;
    mutable std::shared_mutex mutex_;
    AnnotationState state_;
    std::vector<AnnotationRecord> events_;  // appended in this session
};

struct AnnotationQueue {
    Source source = Source::NN;
    std::vector<std::string> directors;  // sampled, in draw order
    size_t n_candidates = 0;

    nlohmann::json to_json() const {
        return {{"source", to_string(source)}, {"directors", directors}, {"n_candidates", n_candidates}};
    }
    static AnnotationQueue from_json(const nlohmann::json& j) {
        return {parse_source(j.at("source").get<std::string>()), j.at("directors").get<std::vector<std::string>>(),
                j.at("n_candidates").get<size_t>()};
    }
};

struct EstimateSettings {
    size_t n_mc = 1000000;
    uint64_t seed = 0;
    bool single_coder = false;
};

// Counts over a queue's reconciled labels; pending directors are skipped
// and reported.
struct QueueCounts {
    AnnotationCounts counts;
    std::vector<std::string> pending;
};

inline QueueCounts queue_counts(const AnnotationQueue& q, const AnnotationState& s, bool single_coder) {
    QueueCounts out;
    std::vector<std::pair<std::string, Label>> labels;
    for (const auto& d : q.directors) {
        auto l = s.label(d, single_coder);
        if (l == Label::Pending) out.pending.push_back(d);
        else labels.emplace_back(d, l);
    }
    out.counts = counts(labels, q.n_candidates, q.source);
    return out;
}

// Per-source posteriors, their combination, and the Unknown-as-FP variant.
inline nlohmann::json estimate_json(const std::vector<AnnotationCounts>& per_source, const EstimateSettings& cfg) {
    nlohmann::json j;
    std::vector<PosteriorEstimate> posts, sens;
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& c : per_source) {
        auto p = beta_posterior(c);
        auto s = beta_posterior(c.unknown_as_fp());
        posts.push_back(p);
        sens.push_back(s);
        auto pj = p.to_json();
        pj["counts"] = {{"tp", c.tp}, {"fp", c.fp}, {"unknown", c.unknown}, {"n_candidates", c.n_candidates}};
        pj["unknown_as_fp"] = s.to_json();
        sources.push_back(pj);
    }
    j["sources"] = sources;
    if (!posts.empty()) {
        auto comb = combine(posts, cfg.n_mc, cfg.seed);
        j["combined"] = {{"median", comb.median}, {"ci95", {comb.lower, comb.upper}}, {"n_mc", comb.n_mc}, {"seed", comb.seed}};
        auto comb_s = combine(sens, cfg.n_mc, cfg.seed);
        j["combined_unknown_as_fp"] = {{"median", comb_s.median}, {"ci95", {comb_s.lower, comb_s.upper}}};
    }
    return j;
}

// Transport-independent request handling for the annotation API.
class AnnotationService {
public:
    using PayloadFn = std::function<std::optional<nlohmann::json>(const std::string&)>;

    AnnotationService(std::vector<AnnotationQueue> queues, AnnotationLog& log, PayloadFn payload,
                      std::string codebook, EstimateSettings settings = {})
        : queues_(std::move(queues)), log_(log), payload_(std::move(payload)), codebook_(std::move(codebook)),
          settings_(settings) {
        for (const auto& q : queues_)
            for (const auto& d : q.directors) queued_[d].insert(q.source);
    }

    // Next director in the queue without a score from this coder.
    std::optional<std::string> next(Source source, const std::string& coder) const {
        auto state = log_.snapshot();
        for (const auto& q : queues_) {
            if (q.source != source) continue;
            for (const auto& d : q.directors)
                if (!state.get(d, coder)) return d;
        }
        return std::nullopt;
    }

    nlohmann::json queue_json(Source source, const std::string& coder) const {
        auto d = next(source, coder);
        size_t total = 0, done = 0;
        auto state = log_.snapshot();
        for (const auto& q : queues_)
            if (q.source == source) {
                total += q.directors.size();
                for (const auto& id : q.directors) done += state.get(id, coder).has_value();
            }
        return {{"source", to_string(source)}, {"coder_id", coder}, {"director_id", d ? nlohmann::json(*d) : nlohmann::json(nullptr)},
                {"labeled", done}, {"total", total}};
    }

    std::optional<nlohmann::json> director(const std::string& id) const {
        auto p = payload_ ? payload_(id) : std::nullopt;
        if (!p) return std::nullopt;
        auto state = log_.snapshot();
        nlohmann::json ann = nlohmann::json::array();
        if (auto it = state.scores().find(id); it != state.scores().end())
            for (const auto& [c, r] : it->second) ann.push_back(r.to_json());
        (*p)["annotations"] = ann;
        (*p)["label"] = to_string(state.label(id, settings_.single_coder));
        return p;
    }

    // Body: {director_id, coder_id, score, notes?}. Source follows the queue.
    nlohmann::json submit(const nlohmann::json& body, const std::optional<std::string>& header_coder = std::nullopt) {
        AnnotationRecord r;
        try {
            r.director_id = body.at("director_id").get<std::string>();
            r.coder_id = body.at("coder_id").get<std::string>();
            r.score = body.at("score").get<int>();
            if (body.contains("notes") && !body.at("notes").is_null()) r.notes = body.at("notes").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("malformed label: ") + e.what());
        }
        if (header_coder && *header_coder != r.coder_id) throw Error("coder_id does not match the coder header");
        auto it = queued_.find(r.director_id);
        if (it == queued_.end()) throw Error("director not in any annotation queue: " + r.director_id);
        r.source = *it->second.begin();
        r.validate();
        r = log_.append(r);
        auto state = log_.snapshot();
        return {{"ok", true}, {"record", r.to_json()}, {"label", to_string(state.label(r.director_id, settings_.single_coder))}};
    }

    nlohmann::json estimate() const {
        auto state = log_.snapshot();
        std::vector<AnnotationCounts> per_source;
        nlohmann::json pending = nlohmann::json::object();
        for (const auto& q : queues_) {
            auto qc = queue_counts(q, state, settings_.single_coder);
            per_source.push_back(qc.counts);
            pending[to_string(q.source)] = qc.pending.size();
        }
        auto j = estimate_json(per_source, settings_);
        j["pending"] = pending;
        return j;
    }

    nlohmann::json export_positives() const {
        auto state = log_.snapshot();
        std::vector<std::string> out;
        for (const auto& q : queues_)
            for (const auto& d : q.directors)
                if (state.label(d, settings_.single_coder) == Label::CSP) out.push_back(d);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return {{"director_ids", out}};
    }

    const std::string& codebook() const { return codebook_; }
    const std::vector<AnnotationQueue>& queues() const { return queues_; }

private:
    std::vector<AnnotationQueue> queues_;
    AnnotationLog& log_;
    PayloadFn payload_;
    std::string codebook_;
    EstimateSettings settings_;
    std::map<std::string, std::set<Source>> queued_;
};

} // namespace nomscreen
