#pragma once

// Exact k-nearest-neighbor search over standardized feature rows and
// neighbor-support flagging.
//
// Squared distances are accumulated dimension by dimension in index order,
// the same order a brute-force scan uses, so results are bitwise equal to
// it. Box lower bounds are summed in the same order and never exceed the
// true distance under IEEE rounding; a subtree is pruned only when its bound
// is strictly worse than the current k-th candidate, so equal-distance rows
// with a smaller index are never missed. Ties break by ascending row index.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "nomscreen/common.hpp"
#include "nomscreen/csv.hpp"

namespace nomscreen {

struct Neighbor {
    size_t row;
    double dist2;
    double distance() const { return std::sqrt(dist2); }
    friend bool operator<(const Neighbor& a, const Neighbor& b) {
        return a.dist2 != b.dist2 ? a.dist2 < b.dist2 : a.row < b.row;
    }
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

class KdTree {
public:
    explicit KdTree(const Eigen::MatrixXd& points, size_t leaf_size = 16)
        : n_(static_cast<size_t>(points.rows())), dim_(static_cast<size_t>(points.cols())), leaf_size_(std::max<size_t>(1, leaf_size)) {
        data_.resize(n_ * dim_);
        for (size_t i = 0; i < n_; ++i)
            for (size_t j = 0; j < dim_; ++j)
                data_[i * dim_ + j] = points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        perm_.resize(n_);
        std::iota(perm_.begin(), perm_.end(), size_t{0});
        if (n_ > 0) build(0, n_);
    }

    size_t size() const { return n_; }
    size_t dim() const { return dim_; }
    const double* row(size_t i) const { return &data_[i * dim_]; }

    double dist2(const double* q, size_t i) const {
        const double* p = row(i);
        double s = 0;
        for (size_t j = 0; j < dim_; ++j) {
            double d = q[j] - p[j];
            s += d * d;
        }
        return s;
    }

    // k nearest to q, ascending by (distance, row); `exclude` is skipped.
    std::vector<Neighbor> query(const double* q, size_t k, std::optional<size_t> exclude = std::nullopt) const {
        std::vector<Neighbor> heap;  // max-heap on (dist2, row)
        if (k == 0 || n_ == 0) return heap;
        heap.reserve(k + 1);
        search(0, q, k, exclude, heap);
        std::sort_heap(heap.begin(), heap.end());
        return heap;
    }

    // Neighbors of a stored row, excluding the row itself.
    std::vector<Neighbor> query_row(size_t i, size_t k) const {
        if (i >= n_) throw Error("row out of range");
        return query(row(i), k, i);
    }

private:
    struct Node {
        size_t begin, end;      // range in perm_
        int32_t left = -1, right = -1;
        std::vector<double> lo, hi;  // bounding box
    };

    int32_t build(size_t begin, size_t end) {
        auto id = static_cast<int32_t>(nodes_.size());
        nodes_.push_back(Node{begin, end, -1, -1, std::vector<double>(dim_), std::vector<double>(dim_)});
        {
            auto& nd = nodes_.back();
            for (size_t j = 0; j < dim_; ++j) {
                double lo = data_[perm_[begin] * dim_ + j], hi = lo;
                for (size_t t = begin + 1; t < end; ++t) {
                    double v = data_[perm_[t] * dim_ + j];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                nd.lo[j] = lo;
                nd.hi[j] = hi;
            }
        }
        if (end - begin <= leaf_size_) return id;
        size_t split = 0;
        double spread = -1;
        for (size_t j = 0; j < dim_; ++j) {
            double s = nodes_[id].hi[j] - nodes_[id].lo[j];
            if (s > spread) {
                spread = s;
                split = j;
            }
        }
        if (spread <= 0) return id;  // all points identical
        size_t mid = begin + (end - begin) / 2;
        std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin), perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                         perm_.begin() + static_cast<std::ptrdiff_t>(end), [&](size_t a, size_t b) {
                             double va = data_[a * dim_ + split], vb = data_[b * dim_ + split];
                             return va != vb ? va < vb : a < b;
                         });
        int32_t l = build(begin, mid);
        int32_t r = build(mid, end);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    double box_dist2(const Node& nd, const double* q) const {
        double s = 0;
        for (size_t j = 0; j < dim_; ++j) {
            double d = 0;
            if (q[j] < nd.lo[j]) d = nd.lo[j] - q[j];
            else if (q[j] > nd.hi[j]) d = q[j] - nd.hi[j];
            s += d * d;
        }
        return s;
    }

    void offer(std::vector<Neighbor>& heap, size_t k, Neighbor cand) const {
        if (heap.size() < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end());
        }
    }

    void search(int32_t id, const double* q, size_t k, std::optional<size_t> exclude, std::vector<Neighbor>& heap) const {
        const Node& nd = nodes_[static_cast<size_t>(id)];
        if (heap.size() == k && box_dist2(nd, q) > heap.front().dist2) return;
        if (nd.left < 0) {
            for (size_t t = nd.begin; t < nd.end; ++t) {
                size_t i = perm_[t];
                if (exclude && *exclude == i) continue;
                offer(heap, k, Neighbor{i, dist2(q, i)});
            }
            return;
        }
        const Node& l = nodes_[static_cast<size_t>(nd.left)];
        const Node& r = nodes_[static_cast<size_t>(nd.right)];
        if (box_dist2(l, q) <= box_dist2(r, q)) {
            search(nd.left, q, k, exclude, heap);
            search(nd.right, q, k, exclude, heap);
        } else {
            search(nd.right, q, k, exclude, heap);
            search(nd.left, q, k, exclude, heap);
        }
    }

    size_t n_, dim_, leaf_size_;
    std::vector<double> data_;  // row-major
    std::vector<size_t> perm_;
    std::vector<Node> nodes_;
};

struct FlagResult {
    size_t row;
    size_t support = 0;       // licensed centers listing this row among their k nearest
    bool flagged = false;     // support >= min_support and not licensed
    bool is_licensed = false;
    double min_distance = std::numeric_limits<double>::infinity();  // to the closest such center
};

struct FlagConfig {
    size_t k = 100;
    size_t min_support = 3;
};

// One result per row. Licensed rows carry their own support (recovery by
// other licensed centers) but are never flagged.
inline std::vector<FlagResult> flag_candidates(const KdTree& index, const std::set<size_t>& licensed_rows,
                                               const FlagConfig& cfg = {}) {
    std::vector<FlagResult> out(index.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i].row = i;
        out[i].is_licensed = licensed_rows.count(i) > 0;
    }
    for (auto c : licensed_rows) {
        if (c >= index.size()) throw Error("licensed row out of range");
        for (const auto& nb : index.query_row(c, cfg.k)) {
            auto& r = out[nb.row];
            ++r.support;
            r.min_distance = std::min(r.min_distance, nb.distance());
        }
    }
    for (auto& r : out) r.flagged = !r.is_licensed && r.support >= cfg.min_support;
    return out;
}

struct FalseNegativePoint {
    size_t min_support;
    size_t n_kept;     // directors with support >= min_support
    size_t n_flagged;  // of those, not licensed
    double fnr;        // licensed with support < min_support, over all licensed
};

inline std::vector<FalseNegativePoint> false_negative_curve(const std::vector<FlagResult>& results,
                                                            const std::vector<size_t>& thresholds) {
    size_t n_licensed = 0;
    for (const auto& r : results) n_licensed += r.is_licensed;
    std::vector<FalseNegativePoint> out;
    for (auto t : thresholds) {
        FalseNegativePoint p{t, 0, 0, 0.0};
        size_t missed = 0;
        for (const auto& r : results) {
            bool kept = r.support >= t;
            p.n_kept += kept;
            p.n_flagged += kept && !r.is_licensed;
            missed += r.is_licensed && !kept;
        }
        p.fnr = n_licensed ? static_cast<double>(missed) / static_cast<double>(n_licensed) : 0.0;
        out.push_back(p);
    }
    return out;
}

// flags_nn.csv: director_id,support,flagged,is_licensed
inline void write_flags_csv(std::ostream& out, const std::vector<FlagResult>& results,
                            const std::vector<std::string>& director_ids) {
    csv::write_row(out, {"director_id", "support", "flagged", "is_licensed"});
    for (const auto& r : results)
        csv::write_row(out, {director_ids.at(r.row), std::to_string(r.support), r.flagged ? "1" : "0",
                             r.is_licensed ? "1" : "0"});
}

} // namespace nomscreen
