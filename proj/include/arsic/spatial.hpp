// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "arsic/ingest.hpp"
#include "json.hpp"

namespace arsic {

struct Edge {
    std::size_t a = 0;  // a < b
    std::size_t b = 0;
    double raw_distance = 0;
    double weight = 0;  // raw_distance plus the type penalty when labels differ

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Strict ordering used by every edge sort: (weight, a, b).
bool edge_less(const Edge& lhs, const Edge& rhs);

struct CutEdge {
    Edge edge;
    std::size_t cluster_a = 0;  // cluster_a < cluster_b
    std::size_t cluster_b = 0;

    friend bool operator==(const CutEdge&, const CutEdge&) = default;
};

/// Clusters are sorted member-id lists, indexed in order of their smallest member.
struct Clustering {
    std::vector<std::vector<std::size_t>> clusters;
    std::vector<CutEdge> cut_edges;

    /// Cluster index for each object id.
    std::vector<std::size_t> membership(std::size_t n) const;
};

struct ThresholdStats {
    double threshold = 0;
    std::size_t sample_count = 0;
    double percentile = 75;
};

inline constexpr double kDefaultPercentile = 75.0;

/// Euclidean distance between the closest points of two boxes; 0 when they touch or overlap.
double box_distance(const Box& a, const Box& b);

/// Single-linkage distance. Throws EmptyGroup if either side is empty.
double group_distance(std::span<const Box> lhs, std::span<const Box> rhs);

/// Complete graph over the image's objects, edges ordered by (a, b).
std::vector<Edge> build_graph(const AnnotatedImage& image, double penalty);

/// Kruskal with (weight, a, b) tie-breaking; result is sorted the same way.
std::vector<Edge> kruskal_mst(std::size_t n, std::span<const Edge> edges);

/// Percentile by linear interpolation at position p * (n - 1) / 100 of the sorted sample.
ThresholdStats compute_threshold(std::span<const double> weights, double percentile = kDefaultPercentile);

/// Removes MST edges heavier than the threshold; the remaining components are the clusters.
Clustering cut_clusters(std::span<const Edge> mst, std::size_t n, double threshold);

nlohmann::json threshold_to_json(const ThresholdStats& stats);
ThresholdStats threshold_from_json(const nlohmann::json& doc);

/// Disjoint-set forest with path halving and union by size.
class UnionFind {
public:
    explicit UnionFind(std::size_t n);

    std::size_t find(std::size_t x);
    bool unite(std::size_t x, std::size_t y);

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

}  // namespace arsic
