// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "arsic/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "arsic/error.hpp"

using nlohmann::json;

namespace arsic {

namespace {

Point centroid_of(std::span<const Point> pts) {
    Point c;
    for (const auto& p : pts) {
        c.x += p.x;
        c.y += p.y;
    }
    c.x /= static_cast<double>(pts.size());
    c.y /= static_cast<double>(pts.size());
    return c;
}

std::vector<Point> centers_of(std::span<const SceneObject> objs) {
    std::vector<Point> out;
    out.reserve(objs.size());
    for (const auto& o : objs) out.push_back({o.box.center_x(), o.box.center_y()});
    return out;
}

RelationKind kind_from_string(const std::string& s) {
    for (auto k : {RelationKind::StandsAlone, RelationKind::Near, RelationKind::InARow, RelationKind::SurroundedBy,
                   RelationKind::DistanceFact}) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorCode::SchemaViolation, "relations[].kind: unknown kind '" + s + "'");
}

}  // namespace

std::string_view to_string(RelationKind kind) {
    switch (kind) {
        case RelationKind::StandsAlone: return "stands_alone";
        case RelationKind::Near: return "near";
        case RelationKind::InARow: return "in_a_row";
        case RelationKind::SurroundedBy: return "surrounded_by";
        case RelationKind::DistanceFact: return "distance_fact";
    }
    return "unknown";
}

std::optional<LineShape> detect_line(std::span<const SceneObject> members, double tol_factor) {
    if (members.size() < 3) {
        throw Error(ErrorCode::TooFewMembers, "line detection needs at least 3 members, got " +
                                                  std::to_string(members.size()));
    }
    const auto centers = centers_of(members);
    const Point mean = centroid_of(centers);

    double sxx = 0, syy = 0, sxy = 0, spread = 0;
    for (const auto& p : centers) {
        const double dx = p.x - mean.x;
        const double dy = p.y - mean.y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
        spread = std::max(spread, std::hypot(dx, dy));
    }
    // Principal axis of the scatter matrix.
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    Point dir{std::cos(theta), std::sin(theta)};
    if (dir.x < 0 || (dir.x == 0 && dir.y < 0)) dir = {-dir.x, -dir.y};
    // cos(pi/2) is not exactly zero; snap near-vertical lines so the sign rule applies.
    if (std::abs(dir.x) < 1e-15) dir = {0.0, 1.0};

    double deviation = 0;
    for (const auto& p : centers) {
        const double d = std::abs(-(p.x - mean.x) * dir.y + (p.y - mean.y) * dir.x);
        deviation = std::max(deviation, d);
    }

    double diag_sum = 0;
    for (const auto& m : members) diag_sum += std::hypot(m.box.width(), m.box.height());
    const double tolerance = tol_factor * diag_sum / static_cast<double>(members.size());

    // Rounding slack so exactly collinear centers pass even with zero-size boxes.
    const double slack = 1e-9 * (1.0 + spread);
    if (deviation > tolerance + slack) return std::nullopt;
    return LineShape{dir, deviation};
}

std::vector<Relation> detect_surrounded(const Clustering& clustering, const AnnotatedImage& image,
                                        double gap_tol_deg) {
    std::vector<Relation> out;
    const auto& objs = image.objects;
    const std::size_t n_groups = clustering.clusters.size();

    std::vector<Point> group_centroids(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
        std::vector<Point> pts;
        for (const auto id : clustering.clusters[g]) pts.push_back({objs[id].box.center_x(), objs[id].box.center_y()});
        group_centroids[g] = centroid_of(pts);
    }

    for (std::size_t inner = 0; inner < n_groups; ++inner) {
        const Point c = group_centroids[inner];
        for (std::size_t outer = 0; outer < n_groups; ++outer) {
            const auto& ring = clustering.clusters[outer];
            if (outer == inner || ring.size() < 3) continue;

            Box hull = objs[ring.front()].box;
            std::vector<double> angles;
            for (const auto id : ring) {
                const Box& b = objs[id].box;
                hull.min_x = std::min(hull.min_x, b.min_x);
                hull.min_y = std::min(hull.min_y, b.min_y);
                hull.max_x = std::max(hull.max_x, b.max_x);
                hull.max_y = std::max(hull.max_y, b.max_y);
                const double dx = b.center_x() - c.x;
                const double dy = b.center_y() - c.y;
                if (dx == 0 && dy == 0) continue;
                angles.push_back(std::atan2(dy, dx) * 180.0 / std::numbers::pi);
            }
            if (c.x < hull.min_x || c.x > hull.max_x || c.y < hull.min_y || c.y > hull.max_y) continue;
            if (angles.size() < 3) continue;

            std::sort(angles.begin(), angles.end());
            double max_gap = 360.0 - (angles.back() - angles.front());
            for (std::size_t k = 1; k < angles.size(); ++k) max_gap = std::max(max_gap, angles[k] - angles[k - 1]);
            if (max_gap <= gap_tol_deg) {
                out.push_back(Relation{RelationKind::SurroundedBy, {inner, outer}, std::nullopt});
            }
        }
    }
    return out;
}

SceneDescription assemble_scene(const AnnotatedImage& image, const Clustering& clustering, double threshold,
                                const PatternParams& params) {
    const std::size_t n = image.objects.size();
    std::vector<bool> seen(n, false);
    for (const auto& cluster : clustering.clusters) {
        for (const auto id : cluster) {
            if (id >= n || seen[id]) {
                throw Error(ErrorCode::InconsistentClustering,
                            "object id " + std::to_string(id) + " is not a unique member of image " + image.image_id);
            }
            seen[id] = true;
        }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw Error(ErrorCode::InconsistentClustering, "clustering does not cover every object of " + image.image_id);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (image.objects[i].id != i) {
            throw Error(ErrorCode::InconsistentClustering, "object ids of " + image.image_id + " are not contiguous");
        }
    }

    SceneDescription scene;
    scene.image_id = image.image_id;

    for (std::size_t g = 0; g < clustering.clusters.size(); ++g) {
        Group group;
        group.index = g;
        group.member_ids = clustering.clusters[g];
        group.is_singleton = group.member_ids.size() == 1;
        std::vector<SceneObject> members;
        for (const auto id : group.member_ids) {
            ++group.label_counts[image.objects[id].label];
            members.push_back(image.objects[id]);
        }
        if (members.size() >= 3) group.line = detect_line(members, params.line_tol_factor);

        if (group.is_singleton) scene.relations.push_back(Relation{RelationKind::StandsAlone, {g}, std::nullopt});
        if (group.line) scene.relations.push_back(Relation{RelationKind::InARow, {g}, std::nullopt});
        scene.groups.push_back(std::move(group));
    }

    const auto boxes_of = [&](std::size_t g) {
        std::vector<Box> boxes;
        for (const auto id : clustering.clusters[g]) boxes.push_back(image.objects[id].box);
        return boxes;
    };
    for (const auto& cut : clustering.cut_edges) {
        const double d = group_distance(boxes_of(cut.cluster_a), boxes_of(cut.cluster_b));
        const auto kind = d <= params.near_factor * threshold ? RelationKind::Near : RelationKind::DistanceFact;
        scene.relations.push_back(Relation{kind, {cut.cluster_a, cut.cluster_b}, d});
    }

    auto surrounded = detect_surrounded(clustering, image, params.gap_tol_deg);
    scene.relations.insert(scene.relations.end(), surrounded.begin(), surrounded.end());

    std::stable_sort(scene.relations.begin(), scene.relations.end(), [](const Relation& l, const Relation& r) {
        return std::tie(l.kind, l.participants) < std::tie(r.kind, r.participants);
    });
    return scene;
}

json scene_to_json(const SceneDescription& scene) {
    json groups = json::array();
    for (const auto& g : scene.groups) {
        json jg = {{"index", g.index},
                   {"members", g.member_ids},
                   {"label_counts", g.label_counts},
                   {"singleton", g.is_singleton}};
        jg["line"] = g.line ? json{{"direction", {g.line->direction.x, g.line->direction.y}},
                                   {"max_deviation", g.line->max_deviation}}
                            : json(nullptr);
        groups.push_back(std::move(jg));
    }
    json relations = json::array();
    for (const auto& r : scene.relations) {
        json jr = {{"kind", to_string(r.kind)}, {"participants", r.participants}};
        if (r.distance) jr["distance"] = *r.distance;
        relations.push_back(std::move(jr));
    }
    return json{{"image_id", scene.image_id}, {"groups", std::move(groups)}, {"relations", std::move(relations)}};
}

SceneDescription scene_from_json(const json& doc) {
    SceneDescription scene;
    try {
        scene.image_id = doc.at("image_id").get<std::string>();
        for (const auto& jg : doc.at("groups")) {
            Group g;
            g.index = jg.at("index").get<std::size_t>();
            g.member_ids = jg.at("members").get<std::vector<std::size_t>>();
            g.label_counts = jg.at("label_counts").get<std::map<std::string, std::size_t>>();
            g.is_singleton = jg.at("singleton").get<bool>();
            if (jg.contains("line") && !jg["line"].is_null()) {
                const auto& jl = jg["line"];
                g.line = LineShape{{jl.at("direction").at(0).get<double>(), jl.at("direction").at(1).get<double>()},
                                   jl.at("max_deviation").get<double>()};
            }
            scene.groups.push_back(std::move(g));
        }
        for (const auto& jr : doc.at("relations")) {
            Relation r;
            r.kind = kind_from_string(jr.at("kind").get<std::string>());
            r.participants = jr.at("participants").get<std::vector<std::size_t>>();
            if (jr.contains("distance")) r.distance = jr["distance"].get<double>();
            for (const auto p : r.participants) {
                if (p >= scene.groups.size()) throw Error(ErrorCode::SchemaViolation, "relation participant out of range");
            }
            scene.relations.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("scene record: ") + e.what());
    }
    return scene;
}

}  // namespace arsic
