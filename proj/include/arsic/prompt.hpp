// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arsic/patterns.hpp"
#include "json.hpp"

namespace arsic {

struct Exemplar {
    std::string scene_text;
    std::vector<std::string> captions;
};

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct PromptBundle {
    std::vector<ChatMessage> messages;
    std::string target_image_id;
};

struct PromptInstructions {
    std::string system_text = default_system_text();

    static std::string default_system_text();
};

/// Text block handed to the model: a "Groups:" section followed by a "Relations:" section.
std::string serialize_scene(const SceneDescription& scene);

/// Renders captions as a bracketed list of double-quoted literals, e.g. ["a", "b"].
std::string render_caption_list(std::span<const std::string> captions);

PromptBundle build_prompt(const SceneDescription& scene, std::span<const Exemplar> exemplars,
                          const PromptInstructions& instructions = {});

/// Parses and validates an exemplar file: [{"scene_text": ..., "captions": [...]}, ...].
/// Throws SchemaViolation on empty captions or captions that mention group ids.
std::vector<Exemplar> parse_exemplars(const nlohmann::json& doc);

nlohmann::json bundle_to_json(const PromptBundle& bundle);

/// Renders a distance with one decimal, ties to even.
std::string format_distance(double value);

}  // namespace arsic
