// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "arsic/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "arsic/error.hpp"

namespace arsic {

bool edge_less(const Edge& lhs, const Edge& rhs) {
    return std::tie(lhs.weight, lhs.a, lhs.b) < std::tie(rhs.weight, rhs.a, rhs.b);
}

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t x) {
    while (parent_[x] != x) {
        parent_[x] = parent_[parent_[x]];
        x = parent_[x];
    }
    return x;
}

bool UnionFind::unite(std::size_t x, std::size_t y) {
    x = find(x);
    y = find(y);
    if (x == y) return false;
    if (size_[x] < size_[y]) std::swap(x, y);
    parent_[y] = x;
    size_[x] += size_[y];
    return true;
}

double box_distance(const Box& a, const Box& b) {
    const double dx = std::max({0.0, a.min_x - b.max_x, b.min_x - a.max_x});
    const double dy = std::max({0.0, a.min_y - b.max_y, b.min_y - a.max_y});
    return std::hypot(dx, dy);
}

double group_distance(std::span<const Box> lhs, std::span<const Box> rhs) {
    if (lhs.empty() || rhs.empty()) throw Error(ErrorCode::EmptyGroup, "single-linkage distance needs non-empty groups");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : lhs) {
        for (const auto& b : rhs) best = std::min(best, box_distance(a, b));
    }
    return best;
}

std::vector<Edge> build_graph(const AnnotatedImage& image, double penalty) {
    const auto& objs = image.objects;
    std::vector<Edge> edges;
    edges.reserve(objs.size() * (objs.size() - (objs.empty() ? 0 : 1)) / 2);
    for (std::size_t i = 0; i < objs.size(); ++i) {
        for (std::size_t j = i + 1; j < objs.size(); ++j) {
            const double raw = box_distance(objs[i].box, objs[j].box);
            const double weight = objs[i].label == objs[j].label ? raw : raw + penalty;
            const auto [a, b] = std::minmax(objs[i].id, objs[j].id);
            edges.push_back(Edge{a, b, raw, weight});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) { return std::tie(l.a, l.b) < std::tie(r.a, r.b); });
    return edges;
}

std::vector<Edge> kruskal_mst(std::size_t n, std::span<const Edge> edges) {
    std::vector<Edge> sorted(edges.begin(), edges.end());
    std::sort(sorted.begin(), sorted.end(), edge_less);

    std::vector<Edge> tree;
    if (n == 0) return tree;
    tree.reserve(n - 1);
    UnionFind forest(n);
    for (const auto& e : sorted) {
        if (e.a >= n || e.b >= n) continue;
        if (forest.unite(e.a, e.b)) {
            tree.push_back(e);
            if (tree.size() == n - 1) break;
        }
    }
    if (tree.size() != n - 1) {
        throw Error(ErrorCode::DisconnectedGraph,
                    "graph on " + std::to_string(n) + " nodes has only " + std::to_string(tree.size() + 1) +
                        " nodes reachable by the spanning forest");
    }
    return tree;
}

ThresholdStats compute_threshold(std::span<const double> weights, double percentile) {
    if (weights.empty()) throw Error(ErrorCode::EmptySample, "no MST edge weights to take a percentile of");
    if (!(percentile > 0 && percentile <= 100)) {
        throw Error(ErrorCode::Config, "percentile must be in (0, 100]");
    }
    std::vector<double> sorted(weights.begin(), weights.end());
    std::sort(sorted.begin(), sorted.end());

    const double pos = percentile * static_cast<double>(sorted.size() - 1) / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    const double value = frac == 0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    return ThresholdStats{value, sorted.size(), percentile};
}

std::vector<std::size_t> Clustering::membership(std::size_t n) const {
    std::vector<std::size_t> out(n, 0);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (const auto id : clusters[c]) {
            if (id < n) out[id] = c;
        }
    }
    return out;
}

Clustering cut_clusters(std::span<const Edge> mst, std::size_t n, double threshold) {
    UnionFind forest(n);
    std::vector<Edge> removed;
    for (const auto& e : mst) {
        if (e.weight <= threshold) {
            forest.unite(e.a, e.b);
        } else {
            removed.push_back(e);
        }
    }

    // Ids are visited in ascending order, so clusters come out ordered by smallest member.
    Clustering out;
    std::vector<std::size_t> root_to_cluster(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> cluster_of(n);
    for (std::size_t id = 0; id < n; ++id) {
        const std::size_t root = forest.find(id);
        if (root_to_cluster[root] == std::numeric_limits<std::size_t>::max()) {
            root_to_cluster[root] = out.clusters.size();
            out.clusters.emplace_back();
        }
        cluster_of[id] = root_to_cluster[root];
        out.clusters[cluster_of[id]].push_back(id);
    }

    std::sort(removed.begin(), removed.end(), edge_less);
    for (const auto& e : removed) {
        const auto ca = cluster_of[e.a];
        const auto cb = cluster_of[e.b];
        out.cut_edges.push_back(CutEdge{e, std::min(ca, cb), std::max(ca, cb)});
    }
    return out;
}

nlohmann::json threshold_to_json(const ThresholdStats& stats) {
    return nlohmann::json{{"percentile", stats.percentile}, {"threshold", stats.threshold}, {"sample_count", stats.sample_count}};
}

ThresholdStats threshold_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("threshold") || !doc["threshold"].is_number()) {
        throw Error(ErrorCode::SchemaViolation, "threshold: missing or not a number");
    }
    ThresholdStats stats;
    stats.threshold = doc["threshold"].get<double>();
    if (!std::isfinite(stats.threshold) || stats.threshold < 0) {
        throw Error(ErrorCode::SchemaViolation, "threshold: must be finite and non-negative");
    }
    stats.percentile = doc.value("percentile", kDefaultPercentile);
    stats.sample_count = doc.value("sample_count", std::size_t{0});
    return stats;
}

}  // namespace arsic
