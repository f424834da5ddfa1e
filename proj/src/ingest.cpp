// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "arsic/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "arsic/error.hpp"

using nlohmann::json;

namespace arsic {

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    return std::equal(prefix.begin(), prefix.end(), s.begin(), [](char a, char b) {
        return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
    });
}

[[noreturn]] void schema_violation(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::SchemaViolation, path + ": " + what);
}

double read_number(const json& j, const std::string& path) {
    if (!j.is_number()) schema_violation(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) schema_violation(path, "non-finite number");
    return v;
}

}  // namespace

bool Box::valid() const {
    return std::isfinite(min_x) && std::isfinite(min_y) && std::isfinite(max_x) && std::isfinite(max_y) &&
           min_x <= max_x && min_y <= max_y;
}

Box polygon_to_box(const std::array<Point, 4>& corners) {
    for (const auto& p : corners) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error(ErrorCode::NonFiniteCoordinate, "polygon corner is not finite");
        }
    }
    Box b{corners[0].x, corners[0].y, corners[0].x, corners[0].y};
    for (const auto& p : corners) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

AnnotatedImage parse_dota(std::string_view text, std::string image_id) {
    AnnotatedImage image;
    image.image_id = std::move(image_id);

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        const std::string_view line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;

        if (line.empty() || starts_with_ci(line, "imagesource:") || starts_with_ci(line, "gsd:")) continue;

        const auto fields = split_ws(line);
        if (fields.size() != 10) {
            throw Error(ErrorCode::MalformedLine,
                        "line " + std::to_string(line_no) + ": expected 10 fields, got " + std::to_string(fields.size()),
                        static_cast<std::int64_t>(line_no));
        }
        std::array<Point, 4> corners;
        for (std::size_t k = 0; k < 4; ++k) {
            const auto x = to_double(fields[2 * k]);
            const auto y = to_double(fields[2 * k + 1]);
            if (!x || !y) {
                throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": unparsable coordinate",
                            static_cast<std::int64_t>(line_no));
            }
            corners[k] = {*x, *y};
        }
        if (!to_double(fields[9])) {
            throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": unparsable difficulty",
                        static_cast<std::int64_t>(line_no));
        }
        Box box;
        try {
            box = polygon_to_box(corners);
        } catch (const Error&) {
            throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": non-finite coordinate",
                        static_cast<std::int64_t>(line_no));
        }
        image.objects.push_back(SceneObject{image.objects.size(), std::string(fields[8]), box});
    }

    if (image.objects.empty()) {
        throw Error(ErrorCode::EmptyAnnotation, "no objects in annotation for " + image.image_id);
    }
    return image;
}

XviewResult parse_xview_geojson(const json& doc, const LabelMap& label_map) {
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
        !doc["features"].is_array()) {
        throw Error(ErrorCode::NotFeatureCollection, "document is not a GeoJSON FeatureCollection");
    }

    std::map<std::string, AnnotatedImage> by_image;
    XviewResult result;
    const auto& features = doc["features"];
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto idx = static_cast<std::int64_t>(i);
        const json& props = features[i].contains("properties") ? features[i]["properties"] : json::object();
        if (!props.is_object() || !props.contains("image_id") || !props.contains("bounds_imcoords") ||
            !props.contains("type_id")) {
            throw Error(ErrorCode::MalformedBounds, "feature " + std::to_string(i) + " lacks required properties", idx);
        }

        const json& tid = props["type_id"];
        long long type_id = 0;
        if (tid.is_number_integer()) {
            type_id = tid.get<long long>();
        } else if (tid.is_string()) {
            const auto s = tid.get<std::string>();
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), type_id);
            if (ec != std::errc() || ptr != s.data() + s.size()) {
                throw Error(ErrorCode::MalformedBounds, "feature " + std::to_string(i) + " has a bad type_id", idx);
            }
        } else {
            throw Error(ErrorCode::MalformedBounds, "feature " + std::to_string(i) + " has a bad type_id", idx);
        }

        if (!props["bounds_imcoords"].is_string()) {
            throw Error(ErrorCode::MalformedBounds, "feature " + std::to_string(i) + ": bounds not a string", idx);
        }
        const auto bounds = props["bounds_imcoords"].get<std::string>();
        std::vector<double> coords;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = bounds.find(',', start);
            const auto part = std::string_view(bounds).substr(start, comma == std::string::npos ? std::string::npos
                                                                                                 : comma - start);
            const auto v = to_double(part);
            if (!v || !std::isfinite(*v)) {
                throw Error(ErrorCode::MalformedBounds, "feature " + std::to_string(i) + ": bad bounds '" + bounds + "'",
                            idx);
            }
            coords.push_back(*v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (coords.size() != 4) {
            throw Error(ErrorCode::MalformedBounds,
                        "feature " + std::to_string(i) + ": expected 4 bounds values, got " + std::to_string(coords.size()),
                        idx);
        }

        const auto& image_id_json = props["image_id"];
        const std::string image_id =
            image_id_json.is_string() ? image_id_json.get<std::string>() : image_id_json.dump();
        auto& image = by_image[image_id];
        image.image_id = image_id;

        const auto label = label_map.find(type_id);
        if (label == label_map.end()) {
            ++result.dropped;
            continue;
        }
        const Box box{std::min(coords[0], coords[2]), std::min(coords[1], coords[3]), std::max(coords[0], coords[2]),
                      std::max(coords[1], coords[3])};
        image.objects.push_back(SceneObject{image.objects.size(), label->second, box});
    }

    for (auto& [id, image] : by_image) {
        if (!image.objects.empty()) result.images.push_back(std::move(image));
    }
    return result;
}

LabelMap parse_label_map(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "label map must be a JSON object");
    LabelMap out;
    for (const auto& [key, value] : doc.items()) {
        long long id = 0;
        const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
        if (ec != std::errc() || ptr != key.data() + key.size()) schema_violation(key, "key is not an integer");
        if (!value.is_string() || value.get<std::string>().empty()) schema_violation(key, "label must be a non-empty string");
        out.emplace(id, value.get<std::string>());
    }
    return out;
}

std::vector<AnnotatedImage> parse_canonical(const json& doc) {
    if (!doc.is_object()) schema_violation("$", "expected an object");
    if (!doc.contains("images")) schema_violation("images", "missing");
    const auto& images = doc["images"];
    if (!images.is_array()) schema_violation("images", "expected an array");

    std::vector<AnnotatedImage> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string ipath = "images[" + std::to_string(i) + "]";
        const auto& jimg = images[i];
        if (!jimg.is_object()) schema_violation(ipath, "expected an object");

        AnnotatedImage image;
        if (!jimg.contains("image_id")) schema_violation(ipath + ".image_id", "missing");
        if (!jimg["image_id"].is_string()) schema_violation(ipath + ".image_id", "expected a string");
        image.image_id = jimg["image_id"].get<std::string>();
        for (const char* dim : {"width", "height"}) {
            if (!jimg.contains(dim) || jimg[dim].is_null()) continue;
            const double v = read_number(jimg[dim], ipath + "." + dim);
            if (v <= 0) schema_violation(ipath + "." + dim, "must be positive");
            (std::string_view(dim) == "width" ? image.width : image.height) = v;
        }

        if (!jimg.contains("objects")) schema_violation(ipath + ".objects", "missing");
        const auto& objects = jimg["objects"];
        if (!objects.is_array()) schema_violation(ipath + ".objects", "expected an array");
        if (objects.empty()) schema_violation(ipath + ".objects", "image has no objects");

        for (std::size_t k = 0; k < objects.size(); ++k) {
            const std::string opath = ipath + ".objects[" + std::to_string(k) + "]";
            const auto& jobj = objects[k];
            if (!jobj.is_object()) schema_violation(opath, "expected an object");
            if (!jobj.contains("label")) schema_violation(opath + ".label", "missing");
            if (!jobj["label"].is_string() || jobj["label"].get<std::string>().empty()) {
                schema_violation(opath + ".label", "expected a non-empty string");
            }
            if (!jobj.contains("box")) schema_violation(opath + ".box", "missing");
            const auto& jbox = jobj["box"];
            if (!jbox.is_array() || jbox.size() != 4) schema_violation(opath + ".box", "expected 4 numbers");
            const Box box{read_number(jbox[0], opath + ".box[0]"), read_number(jbox[1], opath + ".box[1]"),
                          read_number(jbox[2], opath + ".box[2]"), read_number(jbox[3], opath + ".box[3]")};
            if (!box.valid()) schema_violation(opath + ".box", "min must not exceed max");
            if ((image.width && (box.min_x < 0 || box.max_x > *image.width)) ||
                (image.height && (box.min_y < 0 || box.max_y > *image.height))) {
                schema_violation(opath + ".box", "box outside image bounds");
            }
            image.objects.push_back(SceneObject{k, jobj["label"].get<std::string>(), box});
        }
        out.push_back(std::move(image));
    }
    return out;
}

json write_canonical(const std::vector<AnnotatedImage>& images) {
    json jimages = json::array();
    for (const auto& image : images) {
        json jimg = json::object();
        jimg["image_id"] = image.image_id;
        if (image.width) jimg["width"] = *image.width;
        if (image.height) jimg["height"] = *image.height;
        json objects = json::array();
        for (const auto& obj : image.objects) {
            objects.push_back(
                json{{"label", obj.label}, {"box", json::array({obj.box.min_x, obj.box.min_y, obj.box.max_x, obj.box.max_y})}});
        }
        jimg["objects"] = std::move(objects);
        jimages.push_back(std::move(jimg));
    }
    return json{{"images", std::move(jimages)}};
}

CapResult apply_object_cap(std::vector<AnnotatedImage> images, std::size_t max_objects) {
    CapResult result;
    for (auto& image : images) {
        if (image.objects.size() > max_objects) {
            result.skipped.push_back(SkippedImage{image.image_id, image.objects.size()});
        } else {
            result.kept.push_back(std::move(image));
        }
    }
    return result;
}

}  // namespace arsic
