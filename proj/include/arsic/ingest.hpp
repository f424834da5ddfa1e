// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace arsic {

/// Axis-aligned box in pixel coordinates.
struct Box {
    double min_x = 0;
    double min_y = 0;
    double max_x = 0;
    double max_y = 0;

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    double center_x() const { return 0.5 * (min_x + max_x); }
    double center_y() const { return 0.5 * (min_y + max_y); }
    bool valid() const;

    friend bool operator==(const Box&, const Box&) = default;
};

struct Point {
    double x = 0;
    double y = 0;
};

struct SceneObject {
    std::size_t id = 0;
    std::string label;
    Box box;

    friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct AnnotatedImage {
    std::string image_id;
    std::vector<SceneObject> objects;
    std::optional<double> width;
    std::optional<double> height;

    friend bool operator==(const AnnotatedImage&, const AnnotatedImage&) = default;
};

inline constexpr std::size_t kDefaultMaxObjects = 15;

Box polygon_to_box(const std::array<Point, 4>& corners);

/// Reads one DOTA annotation file. Object ids follow line order.
AnnotatedImage parse_dota(std::string_view text, std::string image_id);

struct XviewResult {
    std::vector<AnnotatedImage> images;  // ordered by image_id
    std::size_t dropped = 0;             // features whose type_id is not in the label map
};

using LabelMap = std::map<long long, std::string>;

XviewResult parse_xview_geojson(const nlohmann::json& doc, const LabelMap& label_map);

/// Label map file: {"18": "small car", ...}
LabelMap parse_label_map(const nlohmann::json& doc);

std::vector<AnnotatedImage> parse_canonical(const nlohmann::json& doc);
nlohmann::json write_canonical(const std::vector<AnnotatedImage>& images);

struct SkippedImage {
    std::string image_id;
    std::size_t object_count = 0;
};

struct CapResult {
    std::vector<AnnotatedImage> kept;
    std::vector<SkippedImage> skipped;
};

CapResult apply_object_cap(std::vector<AnnotatedImage> images, std::size_t max_objects = kDefaultMaxObjects);

}  // namespace arsic
