// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arsic/ingest.hpp"
#include "arsic/spatial.hpp"
#include "json.hpp"

namespace arsic {

struct LineShape {
    Point direction;       // unit length, x > 0 (or x == 0 and y > 0)
    double max_deviation;  // largest perpendicular distance of a member center from the fitted line
};

struct Group {
    std::size_t index = 0;
    std::vector<std::size_t> member_ids;
    std::map<std::string, std::size_t> label_counts;
    bool is_singleton = false;
    std::optional<LineShape> line;
};

/// Declaration order is also the relation sort order.
enum class RelationKind { StandsAlone, Near, InARow, SurroundedBy, DistanceFact };

std::string_view to_string(RelationKind kind);

struct Relation {
    RelationKind kind = RelationKind::StandsAlone;
    std::vector<std::size_t> participants;  // group indices; SurroundedBy is (inner, outer)
    std::optional<double> distance;
};

struct SceneDescription {
    std::string image_id;
    std::vector<Group> groups;
    std::vector<Relation> relations;
};

struct PatternParams {
    double line_tol_factor = 0.25;
    double gap_tol_deg = 120.0;
    double near_factor = 1.5;
};

/// Total-least-squares fit through the member box centers. A line is reported when the
/// worst perpendicular deviation stays within tol_factor times the mean box diagonal.
std::optional<LineShape> detect_line(std::span<const SceneObject> members, double tol_factor = 0.25);

/// SurroundedBy(inner, outer) for every ordered pair of groups where the outer group has at
/// least three members, its member centers leave no angular gap wider than gap_tol_deg around
/// the inner centroid, and the inner centroid lies in the outer members' bounding box.
std::vector<Relation> detect_surrounded(const Clustering& clustering, const AnnotatedImage& image,
                                        double gap_tol_deg = 120.0);

SceneDescription assemble_scene(const AnnotatedImage& image, const Clustering& clustering, double threshold,
                                const PatternParams& params = {});

nlohmann::json scene_to_json(const SceneDescription& scene);
SceneDescription scene_from_json(const nlohmann::json& doc);

}  // namespace arsic
