// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "arsic/prompt.hpp"

#include <cstdio>

#include "arsic/error.hpp"
#include "arsic/select.hpp"

using nlohmann::json;

namespace arsic {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string PromptInstructions::default_system_text() {
    return "You describe aerial (remote sensing) images for a captioning dataset. "
           "For each image you receive the output of a geometric analysis of its annotated objects: "
           "the groups of objects found in the image, with the number of objects of each type, whether a "
           "group is laid out in a line and whether an object stands alone, followed by the significant "
           "spatial relations between groups.\n"
           "Write several short, fluent captions that summarise the scene in your own words. "
           "Mention only what the analysis supports, and leave out relations that would be redundant or confusing.\n"
           "Never refer to groups by their id or order: do not write phrases such as \"group 0\", "
           "\"cluster 2\" or \"the first group\".\n"
           "Answer with the captions formatted as a Python list of strings and nothing else, for example: "
           "[\"caption one\", \"caption two\"]";
}

std::string format_distance(double value) {
    // printf rounds the exact binary value to nearest, ties to even.
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", value);
    return buf;
}

std::string serialize_scene(const SceneDescription& scene) {
    std::string out = "Groups:\n";
    for (const auto& g : scene.groups) {
        out += "- group " + std::to_string(g.index) + ": ";
        bool first = true;
        for (const auto& [label, count] : g.label_counts) {
            if (!first) out += ", ";
            out += std::to_string(count) + " " + label;
            first = false;
        }
        if (g.line) out += " (in a line)";
        if (g.is_singleton) out += " (stand-alone)";
        out += "\n";
    }

    out += "Relations:";
    if (scene.relations.empty()) out += "\n- none";
    const auto group = [](std::size_t idx) { return "group " + std::to_string(idx); };
    for (const auto& r : scene.relations) {
        out += "\n- ";
        switch (r.kind) {
            case RelationKind::StandsAlone:
                out += group(r.participants.at(0)) + " stands alone";
                break;
            case RelationKind::InARow:
                out += group(r.participants.at(0)) + " in a row";
                break;
            case RelationKind::Near:
                out += group(r.participants.at(0)) + " near " + group(r.participants.at(1)) + " (distance " +
                       format_distance(r.distance.value_or(0.0)) + ")";
                break;
            case RelationKind::DistanceFact:
                out += group(r.participants.at(0)) + " far from " + group(r.participants.at(1)) + " (distance " +
                       format_distance(r.distance.value_or(0.0)) + ")";
                break;
            case RelationKind::SurroundedBy:
                out += group(r.participants.at(0)) + " surrounded by " + group(r.participants.at(1));
                break;
        }
    }
    return out;
}

std::string render_caption_list(std::span<const std::string> captions) {
    std::string out = "[";
    for (std::size_t i = 0; i < captions.size(); ++i) {
        if (i > 0) out += ", ";
        out += '"';
        for (const char c : captions[i]) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\t': out += "\\t"; break;
                default: out += c;
            }
        }
        out += '"';
    }
    out += "]";
    return out;
}

PromptBundle build_prompt(const SceneDescription& scene, std::span<const Exemplar> exemplars,
                          const PromptInstructions& instructions) {
    PromptBundle bundle;
    bundle.target_image_id = scene.image_id;
    bundle.messages.reserve(2 + 2 * exemplars.size());
    bundle.messages.push_back({Role::System, instructions.system_text});
    for (const auto& ex : exemplars) {
        bundle.messages.push_back({Role::User, ex.scene_text});
        bundle.messages.push_back({Role::Assistant, render_caption_list(ex.captions)});
    }
    bundle.messages.push_back({Role::User, serialize_scene(scene)});
    return bundle;
}

std::vector<Exemplar> parse_exemplars(const json& doc) {
    if (!doc.is_array()) throw Error(ErrorCode::SchemaViolation, "exemplars: expected an array");
    std::vector<Exemplar> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string path = "exemplars[" + std::to_string(i) + "]";
        const auto& j = doc[i];
        if (!j.is_object() || !j.contains("scene_text") || !j["scene_text"].is_string() ||
            j["scene_text"].get<std::string>().empty()) {
            throw Error(ErrorCode::SchemaViolation, path + ".scene_text: expected a non-empty string");
        }
        if (!j.contains("captions") || !j["captions"].is_array() || j["captions"].empty()) {
            throw Error(ErrorCode::SchemaViolation, path + ".captions: expected a non-empty array");
        }
        Exemplar ex;
        ex.scene_text = j["scene_text"].get<std::string>();
        for (std::size_t k = 0; k < j["captions"].size(); ++k) {
            const auto& c = j["captions"][k];
            const std::string cpath = path + ".captions[" + std::to_string(k) + "]";
            if (!c.is_string() || c.get<std::string>().empty()) {
                throw Error(ErrorCode::SchemaViolation, cpath + ": expected a non-empty string");
            }
            if (const auto reason = banned_reason(c.get<std::string>())) {
                throw Error(ErrorCode::SchemaViolation, cpath + ": mentions a group id (" + *reason + ")");
            }
            ex.captions.push_back(c.get<std::string>());
        }
        out.push_back(std::move(ex));
    }
    return out;
}

json bundle_to_json(const PromptBundle& bundle) {
    json messages = json::array();
    for (const auto& m : bundle.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return json{{"target_image_id", bundle.target_image_id}, {"messages", std::move(messages)}};
}

}  // namespace arsic
