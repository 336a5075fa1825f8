#pragma once

// Offshore-leaks flagging: a candidate is flagged when any leak entry of the
// same kind occurs as a substring of it. Each kind is compiled into an
// Aho-Corasick automaton, so a query costs O(|candidate|) regardless of the
// number of entries while keeping exact substring semantics.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "nomscreen/common.hpp"

namespace nomscreen {

// lowercase + collapsed whitespace
inline std::string normalize_leak_text(std::string_view raw) {
    return str::collapse_ws(str::to_lower(raw));
}

class SubstringMatcher {
public:
    SubstringMatcher() { nodes_.emplace_back(); }

    void add(std::string_view pattern) {
        if (pattern.empty()) return;
        int32_t cur = 0;
        for (unsigned char c : pattern) {
            int32_t next = child(cur, c);
            if (next < 0) {
                next = static_cast<int32_t>(nodes_.size());
                auto& edges = nodes_[cur].edges;
                edges.insert(std::lower_bound(edges.begin(), edges.end(), Edge{c, 0}), Edge{c, next});
                nodes_.emplace_back();
            }
            cur = next;
        }
        nodes_[cur].terminal = true;
        compiled_ = false;
    }

    // Builds failure links (BFS over the trie); called lazily by contains_any.
    void compile() {
        std::queue<int32_t> q;
        for (const auto& e : nodes_[0].edges) {
            nodes_[e.target].fail = 0;
            q.push(e.target);
        }
        while (!q.empty()) {
            int32_t u = q.front();
            q.pop();
            nodes_[u].terminal = nodes_[u].terminal || nodes_[nodes_[u].fail].terminal;
            for (const auto& e : nodes_[u].edges) {
                nodes_[e.target].fail = step(nodes_[u].fail, e.label);
                q.push(e.target);
            }
        }
        compiled_ = true;
    }

    bool contains_any(std::string_view text) const {
        if (!compiled_) const_cast<SubstringMatcher*>(this)->compile();
        int32_t cur = 0;
        for (unsigned char c : text) {
            cur = step(cur, c);
            if (nodes_[cur].terminal) return true;
        }
        return false;
    }

    bool empty() const { return nodes_.size() == 1; }

private:
    struct Edge {
        unsigned char label;
        int32_t target;
        bool operator<(const Edge& o) const { return label < o.label; }
    };
    struct Node {
        std::vector<Edge> edges;  // sorted by label
        int32_t fail = 0;
        bool terminal = false;
    };

    int32_t child(int32_t node, unsigned char c) const {
        const auto& edges = nodes_[node].edges;
        auto it = std::lower_bound(edges.begin(), edges.end(), Edge{c, 0});
        return (it != edges.end() && it->label == c) ? it->target : -1;
    }

    int32_t step(int32_t node, unsigned char c) const {
        while (true) {
            int32_t next = child(node, c);
            if (next >= 0) return next;
            if (node == 0) return 0;
            node = nodes_[node].fail;
        }
    }

    std::vector<Node> nodes_;
    bool compiled_ = true;
};

enum class LeakKind { Address, Company, Officer };

class OffshoreLeaksIndex {
public:
    void add(LeakKind kind, std::string_view raw) {
        auto n = normalize_leak_text(raw);
        if (n.empty()) return;
        if (set(kind).insert(n).second) matcher(kind).add(n);
    }

    void load(LeakKind kind, std::istream& in) {
        std::string line;
        while (std::getline(in, line)) add(kind, line);
        matcher(kind).compile();
    }

    // Call once after the last add() before sharing across threads.
    void finalize() {
        addresses_m_.compile();
        companies_m_.compile();
        officers_m_.compile();
    }

    bool flag(std::string_view candidate, LeakKind kind) const { return matcher(kind).contains_any(candidate); }

    const std::set<std::string>& entries(LeakKind kind) const {
        return const_cast<OffshoreLeaksIndex*>(this)->set(kind);
    }
    size_t size() const { return addresses_.size() + companies_.size() + officers_.size(); }

private:
    std::set<std::string>& set(LeakKind k) {
        return k == LeakKind::Address ? addresses_ : k == LeakKind::Company ? companies_ : officers_;
    }
    SubstringMatcher& matcher(LeakKind k) {
        return k == LeakKind::Address ? addresses_m_ : k == LeakKind::Company ? companies_m_ : officers_m_;
    }
    const SubstringMatcher& matcher(LeakKind k) const {
        return k == LeakKind::Address ? addresses_m_ : k == LeakKind::Company ? companies_m_ : officers_m_;
    }

    std::set<std::string> addresses_, companies_, officers_;
    SubstringMatcher addresses_m_, companies_m_, officers_m_;
};

// Candidate must already be normalized (see normalize_leak_text).
inline bool flag_offshore(const OffshoreLeaksIndex& index, std::string_view candidate, LeakKind kind) {
    return index.flag(candidate, kind);
}

} // namespace nomscreen
