// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arsic/ingest.hpp"
#include "arsic/llm_io.hpp"
#include "arsic/patterns.hpp"
#include "arsic/prompt.hpp"
#include "arsic/select.hpp"
#include "arsic/spatial.hpp"
#include "json.hpp"

namespace arsic {

struct PipelineConfig {
    std::size_t max_objects = kDefaultMaxObjects;
    double percentile = kDefaultPercentile;
    double penalty_lambda = 1.0;
    std::optional<double> penalty;    // absolute override of penalty_lambda
    std::optional<double> threshold;  // skips percentile sampling
    PatternParams patterns;
    LlmConfig llm;
    ScorerConfig scorer;
    std::size_t workers = 4;
    std::optional<std::string> mock_responses;  // shorthand for llm.endpoint = "mock:<path>"
    std::optional<std::string> exemplars;       // defaults to the bundled exemplar file

    /// Throws Config on out-of-range values.
    void validate() const;
    nlohmann::json to_json() const;
};

/// Reads a JSON config document. Unknown keys are rejected with a Config error.
PipelineConfig config_from_json(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);

enum class InputFormat { Dota, Xview, Canonical };

InputFormat parse_format(const std::string& name);

// ---------------------------------------------------------------------------
// ingest

struct IngestOutcome {
    std::vector<AnnotatedImage> images;  // ordered by image_id
    std::vector<SkippedImage> skipped;
    std::size_t dropped_features = 0;

    nlohmann::json report(std::size_t max_objects) const;
};

/// Files or directories (expanded to sorted regular files). DOTA image ids are file stems.
IngestOutcome ingest_inputs(const std::vector<std::filesystem::path>& inputs, InputFormat format,
                            const std::optional<std::filesystem::path>& label_map, std::size_t max_objects);

// ---------------------------------------------------------------------------
// analyze

struct ThresholdInfo {
    ThresholdStats stats;
    double penalty = 0;

    nlohmann::json to_json() const;
    static ThresholdInfo from_json(const nlohmann::json& doc);
};

struct AnalyzeOutcome {
    ThresholdInfo threshold;
    std::vector<SceneDescription> scenes;  // ordered by image_id
    std::vector<Clustering> clusterings;   // parallel to scenes
};

/// Penalty used when none is given explicitly: lambda times the mean raw-distance MST edge weight.
double derive_penalty(const std::vector<AnnotatedImage>& images, double lambda, std::size_t workers);

/// Pass 1 builds every penalized MST and takes the percentile of their edge weights (unless a
/// threshold is supplied); pass 2 cuts each MST and describes the scene.
AnalyzeOutcome analyze(const std::vector<AnnotatedImage>& images, const PipelineConfig& cfg,
                       const std::optional<ThresholdInfo>& preset = std::nullopt);

// ---------------------------------------------------------------------------
// caption

struct CaptionRecord {
    std::string image_id;
    std::vector<std::string> captions;
    std::string raw_response;
    int llm_calls = 0;
    std::optional<std::string> error_code;
    std::optional<std::string> error_message;

    nlohmann::json to_json() const;
    static CaptionRecord from_json(const nlohmann::json& doc);
};

inline constexpr const char* kCorrectiveMessage = "Return only the list.";

/// One image: prompt, call, parse; on a parse failure, one corrective follow-up turn.
/// Transport and parse failures are recorded on the record, never thrown.
CaptionRecord caption_scene(const SceneDescription& scene, std::span<const Exemplar> exemplars, ChatClient& client,
                            const PromptInstructions& instructions = {});

std::vector<CaptionRecord> caption_scenes(const std::vector<SceneDescription>& scenes,
                                          std::span<const Exemplar> exemplars, ChatClient& client, std::size_t workers,
                                          std::vector<PromptBundle>* prompts = nullptr);

/// Fails with a Config error naming ARSIC_API_KEY when a live endpoint has no key.
LlmConfig resolve_llm_config(const PipelineConfig& cfg);

std::vector<Exemplar> load_exemplars(const std::optional<std::string>& path);
std::filesystem::path default_exemplar_path();

// ---------------------------------------------------------------------------
// select

struct SelectionRecord {
    std::string image_id;
    std::vector<CaptionCandidate> candidates;  // ranked, filtered ones last
    std::optional<std::string> error_code;

    nlohmann::json to_json() const;
    static SelectionRecord from_json(const nlohmann::json& doc);
    /// Highest-ranked selected caption, if any.
    std::optional<std::string> best() const;
};

std::vector<SelectionRecord> select_captions(const std::vector<CaptionRecord>& records, const ScorerConfig& cfg,
                                             QualityScorer& scorer, std::size_t workers);

// ---------------------------------------------------------------------------
// score

struct ImageScore {
    std::string image_id;
    std::string candidate;
    double cider_d = 0;
};

struct ScoreReport {
    std::vector<ImageScore> per_image;
    std::size_t skipped_missing_refs = 0;
    std::size_t skipped_no_candidate = 0;
    double mean = 0;  // 0..10 scale

    nlohmann::json summary() const;
};

ScoreReport score_selections(const std::vector<SelectionRecord>& selections, const nlohmann::json& references);

// ---------------------------------------------------------------------------
// files

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);
nlohmann::json read_json(const std::filesystem::path& path);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<nlohmann::json>& records);
std::string dump_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// run

struct RunOptions {
    std::vector<std::filesystem::path> inputs;
    InputFormat format = InputFormat::Dota;
    std::optional<std::filesystem::path> label_map;
    std::filesystem::path out_dir;
    bool resume = false;
};

struct RunSummary {
    std::vector<std::string> executed;
    std::vector<std::string> reused;
};

/// ingest -> analyze -> caption -> select, keeping every intermediate artifact in out_dir.
/// With resume, a stage is skipped when the hash of its inputs matches the manifest.
RunSummary run_pipeline(const RunOptions& options, const PipelineConfig& cfg,
                        std::shared_ptr<HttpTransport> llm_transport = nullptr,
                        std::unique_ptr<QualityScorer> scorer = nullptr);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace arsic
