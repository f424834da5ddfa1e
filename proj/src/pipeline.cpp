// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "arsic/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "arsic/error.hpp"
#include "arsic/metrics.hpp"
#include "arsic/text.hpp"

#ifndef ARSIC_ASSET_DIR
#define ARSIC_ASSET_DIR "assets"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace arsic {

// ---------------------------------------------------------------------------
// config

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) config_error(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) config_error(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read_key(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        config_error(where + "." + key + ": wrong type");
    }
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out, const std::string& where) {
    if (!obj.contains(key) || obj.at(key).is_null()) return;
    T value{};
    read_key(obj, key, value, where);
    out = value;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

bool is_parse_error(ErrorCode code) {
    return code == ErrorCode::NoListFound || code == ErrorCode::UnterminatedString ||
           code == ErrorCode::NonStringElement || code == ErrorCode::EmptyList;
}

}  // namespace

void PipelineConfig::validate() const {
    if (max_objects < 1) config_error("max_objects must be at least 1");
    if (!(percentile > 0 && percentile <= 100)) config_error("percentile must be in (0, 100]");
    if (!(penalty_lambda >= 0) || !std::isfinite(penalty_lambda)) config_error("penalty_lambda must be non-negative");
    if (penalty && (!(*penalty >= 0) || !std::isfinite(*penalty))) config_error("penalty must be non-negative");
    if (threshold && (!(*threshold >= 0) || !std::isfinite(*threshold))) config_error("threshold must be non-negative");
    if (!(patterns.line_tol_factor > 0)) config_error("line_tol_factor must be positive");
    if (!(patterns.gap_tol_deg > 0 && patterns.gap_tol_deg < 360)) config_error("gap_tol_deg must be in (0, 360)");
    if (!(patterns.near_factor >= 1)) config_error("near_factor must be at least 1");
    if (workers < 1) config_error("workers must be at least 1");
    scorer.validate();
}

json PipelineConfig::to_json() const {
    json j = {{"max_objects", max_objects},
              {"percentile", percentile},
              {"penalty_lambda", penalty_lambda},
              {"penalty", penalty ? json(*penalty) : json(nullptr)},
              {"threshold", threshold ? json(*threshold) : json(nullptr)},
              {"line_tol_factor", patterns.line_tol_factor},
              {"gap_tol_deg", patterns.gap_tol_deg},
              {"near_factor", patterns.near_factor},
              {"workers", workers},
              {"mock_responses", mock_responses ? json(*mock_responses) : json(nullptr)},
              {"exemplars", exemplars ? json(*exemplars) : json(nullptr)}};
    j["llm"] = {{"endpoint", llm.endpoint},           {"model", llm.model},
                {"temperature", llm.temperature},     {"max_retries", llm.max_retries},
                {"timeout_s", llm.timeout_s},         {"max_concurrency", llm.max_concurrency},
                {"seed", llm.seed}};
    j["scorer"] = {{"endpoint", scorer.endpoint}, {"wq", scorer.wq}, {"wd", scorer.wd}, {"k", scorer.k},
                   {"timeout_s", scorer.timeout_s}};
    return j;
}

PipelineConfig config_from_json(const json& doc) {
    reject_unknown(doc,
                   {"max_objects", "percentile", "penalty_lambda", "penalty", "threshold", "line_tol_factor",
                    "gap_tol_deg", "near_factor", "workers", "mock_responses", "exemplars", "llm", "scorer"},
                   "config");
    PipelineConfig cfg;
    read_key(doc, "max_objects", cfg.max_objects, "config");
    read_key(doc, "percentile", cfg.percentile, "config");
    read_key(doc, "penalty_lambda", cfg.penalty_lambda, "config");
    read_optional(doc, "penalty", cfg.penalty, "config");
    read_optional(doc, "threshold", cfg.threshold, "config");
    read_key(doc, "line_tol_factor", cfg.patterns.line_tol_factor, "config");
    read_key(doc, "gap_tol_deg", cfg.patterns.gap_tol_deg, "config");
    read_key(doc, "near_factor", cfg.patterns.near_factor, "config");
    read_key(doc, "workers", cfg.workers, "config");
    read_optional(doc, "mock_responses", cfg.mock_responses, "config");
    read_optional(doc, "exemplars", cfg.exemplars, "config");

    if (doc.contains("llm")) {
        const auto& j = doc["llm"];
        reject_unknown(j, {"endpoint", "model", "temperature", "max_retries", "timeout_s", "max_concurrency", "seed"},
                       "config.llm");
        read_key(j, "endpoint", cfg.llm.endpoint, "config.llm");
        read_key(j, "model", cfg.llm.model, "config.llm");
        read_key(j, "temperature", cfg.llm.temperature, "config.llm");
        read_key(j, "max_retries", cfg.llm.max_retries, "config.llm");
        read_key(j, "timeout_s", cfg.llm.timeout_s, "config.llm");
        read_key(j, "max_concurrency", cfg.llm.max_concurrency, "config.llm");
        read_key(j, "seed", cfg.llm.seed, "config.llm");
    }
    if (doc.contains("scorer")) {
        const auto& j = doc["scorer"];
        reject_unknown(j, {"endpoint", "wq", "wd", "k", "timeout_s"}, "config.scorer");
        read_key(j, "endpoint", cfg.scorer.endpoint, "config.scorer");
        read_key(j, "wq", cfg.scorer.wq, "config.scorer");
        read_key(j, "wd", cfg.scorer.wd, "config.scorer");
        read_key(j, "k", cfg.scorer.k, "config.scorer");
        read_key(j, "timeout_s", cfg.scorer.timeout_s, "config.scorer");
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        config_error("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

InputFormat parse_format(const std::string& name) {
    if (name == "dota") return InputFormat::Dota;
    if (name == "xview") return InputFormat::Xview;
    if (name == "canonical") return InputFormat::Canonical;
    config_error("unknown input format '" + name + "' (expected dota, xview or canonical)");
}

// ---------------------------------------------------------------------------
// files

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, path.string() + ": " + e.what());
    }
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::vector<json> out;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::SchemaViolation, path.string() + ":" + std::to_string(line_no) + ": " + e.what(),
                        static_cast<std::int64_t>(line_no));
        }
    }
    return out;
}

std::string to_jsonl(const std::vector<json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mu);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// ingest

json IngestOutcome::report(std::size_t max_objects) const {
    json skipped_json = json::array();
    for (const auto& s : skipped) skipped_json.push_back({{"image_id", s.image_id}, {"object_count", s.object_count}});
    return json{{"max_objects", max_objects},
                {"images_kept", images.size()},
                {"skipped", std::move(skipped_json)},
                {"dropped_features", dropped_features}};
}

namespace {

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs, InputFormat format) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(in)) {
                if (!entry.is_regular_file()) continue;
                const auto ext = entry.path().extension().string();
                const bool wanted = format == InputFormat::Dota ? ext == ".txt"
                                    : format == InputFormat::Xview
                                        ? (ext == ".geojson" || ext == ".json")
                                        : ext == ".json";
                if (wanted) found.push_back(entry.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::exists(in)) {
            files.push_back(in);
        } else {
            throw Error(ErrorCode::Io, "input does not exist: " + in.string());
        }
    }
    return files;
}

}  // namespace

IngestOutcome ingest_inputs(const std::vector<fs::path>& inputs, InputFormat format,
                            const std::optional<fs::path>& label_map, std::size_t max_objects) {
    LabelMap labels;
    if (format == InputFormat::Xview) {
        if (!label_map) config_error("xview input needs a label map (--label-map)");
        labels = parse_label_map(read_json(*label_map));
    }

    std::vector<AnnotatedImage> images;
    IngestOutcome outcome;
    for (const auto& file : expand_inputs(inputs, format)) {
        try {
            switch (format) {
                case InputFormat::Dota:
                    images.push_back(parse_dota(read_file(file), file.stem().string()));
                    break;
                case InputFormat::Xview: {
                    auto result = parse_xview_geojson(read_json(file), labels);
                    outcome.dropped_features += result.dropped;
                    for (auto& img : result.images) images.push_back(std::move(img));
                    break;
                }
                case InputFormat::Canonical:
                    for (auto& img : parse_canonical(read_json(file))) images.push_back(std::move(img));
                    break;
            }
        } catch (const Error& e) {
            throw Error(e.code(), file.string() + ": " + e.what(), e.detail());
        }
    }

    std::sort(images.begin(), images.end(),
              [](const AnnotatedImage& a, const AnnotatedImage& b) { return a.image_id < b.image_id; });
    for (std::size_t i = 1; i < images.size(); ++i) {
        if (images[i].image_id == images[i - 1].image_id) {
            throw Error(ErrorCode::SchemaViolation, "duplicate image_id '" + images[i].image_id + "' across inputs");
        }
    }

    auto capped = apply_object_cap(std::move(images), max_objects);
    outcome.images = std::move(capped.kept);
    outcome.skipped = std::move(capped.skipped);
    return outcome;
}

// ---------------------------------------------------------------------------
// analyze

json ThresholdInfo::to_json() const {
    json j = threshold_to_json(stats);
    j["penalty"] = penalty;
    return j;
}

ThresholdInfo ThresholdInfo::from_json(const json& doc) {
    ThresholdInfo info;
    info.stats = threshold_from_json(doc);
    if (doc.contains("penalty")) {
        if (!doc["penalty"].is_number() || doc["penalty"].get<double>() < 0) {
            throw Error(ErrorCode::SchemaViolation, "threshold.penalty: must be a non-negative number");
        }
        info.penalty = doc["penalty"].get<double>();
    }
    return info;
}

double derive_penalty(const std::vector<AnnotatedImage>& images, double lambda, std::size_t workers) {
    std::vector<std::vector<Edge>> trees(images.size());
    parallel_for(images.size(), workers, [&](std::size_t i) {
        trees[i] = kruskal_mst(images[i].objects.size(), build_graph(images[i], 0.0));
    });
    double sum = 0;
    std::size_t count = 0;
    for (const auto& tree : trees) {
        for (const auto& e : tree) {
            sum += e.raw_distance;
            ++count;
        }
    }
    return count == 0 ? 0.0 : lambda * sum / static_cast<double>(count);
}

AnalyzeOutcome analyze(const std::vector<AnnotatedImage>& input, const PipelineConfig& cfg,
                       const std::optional<ThresholdInfo>& preset) {
    if (input.empty()) throw Error(ErrorCode::EmptyDataset, "no images to analyze");
    std::vector<AnnotatedImage> images = input;
    std::sort(images.begin(), images.end(),
              [](const AnnotatedImage& a, const AnnotatedImage& b) { return a.image_id < b.image_id; });

    AnalyzeOutcome out;
    if (preset) {
        out.threshold = *preset;
        if (cfg.penalty) out.threshold.penalty = *cfg.penalty;
    } else {
        out.threshold.penalty = cfg.penalty ? *cfg.penalty : derive_penalty(images, cfg.penalty_lambda, cfg.workers);
    }
    const double penalty = out.threshold.penalty;

    // Pass 1: penalized MSTs.
    std::vector<std::vector<Edge>> trees(images.size());
    parallel_for(images.size(), cfg.workers, [&](std::size_t i) {
        trees[i] = kruskal_mst(images[i].objects.size(), build_graph(images[i], penalty));
    });

    if (!preset) {
        if (cfg.threshold) {
            out.threshold.stats = ThresholdStats{*cfg.threshold, 0, cfg.percentile};
        } else {
            std::vector<double> sample;
            for (const auto& tree : trees) {
                for (const auto& e : tree) sample.push_back(e.weight);
            }
            if (sample.empty()) {
                throw Error(ErrorCode::EmptyDataset,
                            "no MST edges to take the percentile of (every image has one object); "
                            "pass an explicit --threshold");
            }
            out.threshold.stats = compute_threshold(sample, cfg.percentile);
        }
    }

    // Pass 2: cut and describe.
    const double threshold = out.threshold.stats.threshold;
    out.scenes.resize(images.size());
    out.clusterings.resize(images.size());
    parallel_for(images.size(), cfg.workers, [&](std::size_t i) {
        out.clusterings[i] = cut_clusters(trees[i], images[i].objects.size(), threshold);
        out.scenes[i] = assemble_scene(images[i], out.clusterings[i], threshold, cfg.patterns);
    });
    return out;
}

// ---------------------------------------------------------------------------
// caption

json CaptionRecord::to_json() const {
    json j = {{"image_id", image_id}, {"captions", captions}, {"raw_response", raw_response}, {"llm_calls", llm_calls}};
    j["error"] = error_code ? json{{"code", *error_code}, {"message", error_message.value_or("")}} : json(nullptr);
    return j;
}

CaptionRecord CaptionRecord::from_json(const json& doc) {
    CaptionRecord r;
    try {
        r.image_id = doc.at("image_id").get<std::string>();
        r.captions = doc.at("captions").get<std::vector<std::string>>();
        r.raw_response = doc.value("raw_response", "");
        r.llm_calls = doc.value("llm_calls", 0);
        if (doc.contains("error") && !doc["error"].is_null()) {
            r.error_code = doc["error"].at("code").get<std::string>();
            r.error_message = doc["error"].value("message", "");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("caption record: ") + e.what());
    }
    return r;
}

CaptionRecord caption_scene(const SceneDescription& scene, std::span<const Exemplar> exemplars, ChatClient& client,
                            const PromptInstructions& instructions) {
    CaptionRecord record;
    record.image_id = scene.image_id;
    PromptBundle bundle = build_prompt(scene, exemplars, instructions);

    const auto fail = [&](const Error& e) {
        record.captions.clear();
        record.error_code = std::string(to_string(e.code()));
        record.error_message = e.what();
    };

    for (int round = 0; round < 2; ++round) {
        RawResponse response;
        try {
            ++record.llm_calls;
            response = client.complete(bundle);
        } catch (const Error& e) {
            fail(e);
            return record;
        }
        record.raw_response = response.text;
        try {
            record.captions = parse_caption_list(response.text);
            record.error_code.reset();
            record.error_message.reset();
            return record;
        } catch (const Error& e) {
            if (!is_parse_error(e.code())) throw;
            fail(e);
        }
        if (!response.text.empty()) bundle.messages.push_back({Role::Assistant, response.text});
        bundle.messages.push_back({Role::User, kCorrectiveMessage});
    }
    return record;
}

std::vector<CaptionRecord> caption_scenes(const std::vector<SceneDescription>& scenes,
                                          std::span<const Exemplar> exemplars, ChatClient& client, std::size_t workers,
                                          std::vector<PromptBundle>* prompts) {
    std::vector<const SceneDescription*> ordered;
    for (const auto& s : scenes) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const SceneDescription* a, const SceneDescription* b) { return a->image_id < b->image_id; });

    std::vector<CaptionRecord> out(ordered.size());
    parallel_for(ordered.size(), workers, [&](std::size_t i) { out[i] = caption_scene(*ordered[i], exemplars, client); });
    if (prompts) {
        prompts->clear();
        for (const auto* s : ordered) prompts->push_back(build_prompt(*s, exemplars));
    }
    return out;
}

LlmConfig resolve_llm_config(const PipelineConfig& cfg) {
    LlmConfig llm = cfg.llm;
    if (cfg.mock_responses) llm.endpoint = std::string(kMockPrefix) + *cfg.mock_responses;
    if (llm.endpoint.empty()) config_error("no LLM endpoint configured (set llm.endpoint or --mock-responses)");
    if (!llm.is_mock()) {
        const char* key = std::getenv(kApiKeyEnv);
        if (key == nullptr || *key == '\0') {
            config_error(std::string("live LLM endpoint requires an API key in the environment variable ") + kApiKeyEnv);
        }
        llm.api_key = key;
    }
    llm.validate();
    return llm;
}

fs::path default_exemplar_path() {
    if (const char* dir = std::getenv("ARSIC_ASSET_DIR"); dir != nullptr && *dir != '\0') {
        return fs::path(dir) / "exemplars.json";
    }
    return fs::path(ARSIC_ASSET_DIR) / "exemplars.json";
}

std::vector<Exemplar> load_exemplars(const std::optional<std::string>& path) {
    const fs::path file = path ? fs::path(*path) : default_exemplar_path();
    try {
        return parse_exemplars(read_json(file));
    } catch (const Error& e) {
        throw Error(ErrorCode::Config, file.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// select

json SelectionRecord::to_json() const {
    json candidates_json = json::array();
    for (const auto& c : candidates) candidates_json.push_back(candidate_to_json(c));
    json j = {{"image_id", image_id}, {"candidates", std::move(candidates_json)}};
    if (error_code) j["error"] = *error_code;
    return j;
}

SelectionRecord SelectionRecord::from_json(const json& doc) {
    SelectionRecord r;
    try {
        r.image_id = doc.at("image_id").get<std::string>();
        const auto& cands = doc.at("candidates");
        for (std::size_t i = 0; i < cands.size(); ++i) {
            const auto& jc = cands[i];
            CaptionCandidate c;
            c.text = jc.at("text").get<std::string>();
            c.original_index = i;
            c.filtered = jc.value("filtered", false);
            c.reason = jc.value("reason", "");
            c.quality = jc.value("quality", 0.0);
            c.diversity = jc.value("diversity", 0.0);
            if (jc.contains("final") && jc["final"].is_number()) c.final_score = jc["final"].get<double>();
            c.selected = jc.value("selected", false);
            r.candidates.push_back(std::move(c));
        }
        if (doc.contains("error") && doc["error"].is_string()) r.error_code = doc["error"].get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("selection record: ") + e.what());
    }
    return r;
}

std::optional<std::string> SelectionRecord::best() const {
    for (const auto& c : candidates) {
        if (c.selected) return c.text;
    }
    return std::nullopt;
}

std::vector<SelectionRecord> select_captions(const std::vector<CaptionRecord>& input, const ScorerConfig& cfg,
                                             QualityScorer& scorer, std::size_t workers) {
    cfg.validate();
    std::vector<const CaptionRecord*> records;
    for (const auto& r : input) records.push_back(&r);
    std::sort(records.begin(), records.end(),
              [](const CaptionRecord* a, const CaptionRecord* b) { return a->image_id < b->image_id; });

    std::vector<SelectionRecord> out(records.size());
    parallel_for(records.size(), workers, [&](std::size_t i) {
        const CaptionRecord& rec = *records[i];
        SelectionRecord& sel = out[i];
        sel.image_id = rec.image_id;
        if (rec.captions.empty()) {
            sel.error_code = rec.error_code.value_or("NoCaptions");
            return;
        }

        std::vector<std::string> corpus;
        for (std::size_t j = 0; j < records.size(); ++j) {
            if (j == i) continue;
            corpus.insert(corpus.end(), records[j]->captions.begin(), records[j]->captions.end());
        }

        std::vector<CaptionCandidate> candidates;
        for (std::size_t k = 0; k < rec.captions.size(); ++k) {
            CaptionCandidate c;
            c.text = rec.captions[k];
            c.original_index = k;
            if (auto reason = banned_reason(c.text)) {
                c.filtered = true;
                c.reason = std::move(*reason);
            } else {
                c.quality = scorer.score(c.text, rec.image_id);
                c.diversity = diversity_score(c.text, corpus);
            }
            candidates.push_back(std::move(c));
        }
        try {
            sel.candidates = combine_and_select(std::move(candidates), cfg);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::AllFiltered) throw;
            sel.error_code = std::string(to_string(e.code()));
            for (std::size_t k = 0; k < rec.captions.size(); ++k) {
                CaptionCandidate c;
                c.text = rec.captions[k];
                c.original_index = k;
                c.filtered = true;
                c.reason = *banned_reason(c.text);
                sel.candidates.push_back(std::move(c));
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// score

json ScoreReport::summary() const {
    return json{{"images_scored", per_image.size()},
                {"skipped_missing_references", skipped_missing_refs},
                {"skipped_no_candidate", skipped_no_candidate},
                {"cider_d_mean", mean},
                {"cider_d_x100", mean * 100.0}};
}

ScoreReport score_selections(const std::vector<SelectionRecord>& selections, const json& references) {
    if (!references.is_object()) throw Error(ErrorCode::SchemaViolation, "references: expected an object of image_id -> [captions]");
    std::map<std::string, std::vector<std::string>> refs;
    for (const auto& [id, list] : references.items()) {
        if (!list.is_array() || !std::all_of(list.begin(), list.end(), [](const json& v) { return v.is_string(); })) {
            throw Error(ErrorCode::SchemaViolation, "references." + id + ": expected a list of strings");
        }
        refs.emplace(id, list.get<std::vector<std::string>>());
    }

    ScoreReport report;
    std::vector<std::pair<std::string, std::string>> work;  // (image_id, candidate)
    for (const auto& sel : selections) {
        const auto it = refs.find(sel.image_id);
        if (it == refs.end() || it->second.empty()) {
            ++report.skipped_missing_refs;
            continue;
        }
        const auto best = sel.best();
        if (!best) {
            ++report.skipped_no_candidate;
            continue;
        }
        work.emplace_back(sel.image_id, *best);
    }
    std::sort(work.begin(), work.end());
    if (work.empty()) throw Error(ErrorCode::NoOverlap, "no selected caption has references to score against");

    std::vector<metrics::ReferenceSet> corpus;
    for (const auto& [id, cand] : work) corpus.push_back(refs[id]);
    const auto df = metrics::corpus_df(corpus);

    double total = 0;
    for (const auto& [id, cand] : work) {
        const double s = metrics::cider_d(cand, refs[id], df);
        report.per_image.push_back(ImageScore{id, cand, s});
        total += s;
    }
    report.mean = total / static_cast<double>(report.per_image.size());
    return report;
}

// ---------------------------------------------------------------------------
// run

namespace {

class Manifest {
public:
    explicit Manifest(fs::path path) : path_(std::move(path)) {
        if (fs::exists(path_)) {
            try {
                doc_ = json::parse(read_file(path_));
            } catch (const json::exception&) {
                doc_ = json::object();
            }
        }
        if (!doc_.is_object() || !doc_.contains("stages") || !doc_["stages"].is_object()) doc_ = {{"stages", json::object()}};
    }

    bool fresh(const std::string& stage, const std::string& hash, const std::vector<fs::path>& outputs) const {
        const auto& stages = doc_["stages"];
        if (!stages.contains(stage) || stages[stage].value("input_hash", "") != hash) return false;
        return std::all_of(outputs.begin(), outputs.end(), [](const fs::path& p) { return fs::exists(p); });
    }

    void record(const std::string& stage, const std::string& hash, const std::vector<fs::path>& outputs) {
        json names = json::array();
        for (const auto& p : outputs) names.push_back(p.filename().string());
        doc_["stages"][stage] = {{"input_hash", hash}, {"outputs", std::move(names)}};
        write_file(path_, dump_json(doc_));
    }

private:
    fs::path path_;
    json doc_;
};

std::string hash_parts(const std::vector<std::string>& parts) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : parts) {
        h = fnv1a64(std::to_string(p.size()), h);
        h = fnv1a64(":", h);
        h = fnv1a64(p, h);
    }
    return hex64(h);
}

template <typename Fn>
auto in_stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), "stage " + name + ": " + e.what(), e.detail());
    }
}

}  // namespace

RunSummary run_pipeline(const RunOptions& options, const PipelineConfig& cfg, std::shared_ptr<HttpTransport> llm_transport,
                        std::unique_ptr<QualityScorer> scorer) {
    cfg.validate();
    RunSummary summary;
    const fs::path dir = options.out_dir;
    fs::create_directories(dir);
    Manifest manifest(dir / "manifest.json");

    const fs::path canonical = dir / "canonical.json";
    const fs::path ingest_report = dir / "ingest_report.json";
    const fs::path threshold_file = dir / "threshold.json";
    const fs::path scenes_file = dir / "scenes.jsonl";
    const fs::path captions_file = dir / "captions.jsonl";
    const fs::path prompts_file = dir / "prompts.jsonl";
    const fs::path selected_file = dir / "selected.jsonl";

    const auto stage = [&](const std::string& name, const std::string& hash, const std::vector<fs::path>& outputs,
                           const std::function<void()>& body) {
        if (options.resume && manifest.fresh(name, hash, outputs)) {
            summary.reused.push_back(name);
            return;
        }
        in_stage(name, [&] {
            body();
            return 0;
        });
        manifest.record(name, hash, outputs);
        summary.executed.push_back(name);
    };

    // ingest
    {
        std::vector<std::string> parts = {"ingest", std::to_string(static_cast<int>(options.format)),
                                          std::to_string(cfg.max_objects)};
        if (options.label_map) parts.push_back(read_file(*options.label_map));
        for (const auto& f : expand_inputs(options.inputs, options.format)) {
            parts.push_back(f.filename().string());
            parts.push_back(read_file(f));
        }
        stage("ingest", hash_parts(parts), {canonical, ingest_report}, [&] {
            auto outcome = ingest_inputs(options.inputs, options.format, options.label_map, cfg.max_objects);
            if (outcome.images.empty() && outcome.skipped.empty()) {
                throw Error(ErrorCode::EmptyDataset, "no annotations found in the inputs");
            }
            write_file(canonical, dump_json(write_canonical(outcome.images)));
            write_file(ingest_report, dump_json(outcome.report(cfg.max_objects)));
        });
    }

    // analyze
    {
        const json knobs = {{"percentile", cfg.percentile},
                            {"penalty_lambda", cfg.penalty_lambda},
                            {"penalty", cfg.penalty ? json(*cfg.penalty) : json(nullptr)},
                            {"threshold", cfg.threshold ? json(*cfg.threshold) : json(nullptr)},
                            {"line_tol_factor", cfg.patterns.line_tol_factor},
                            {"gap_tol_deg", cfg.patterns.gap_tol_deg},
                            {"near_factor", cfg.patterns.near_factor}};
        stage("analyze", hash_parts({"analyze", read_file(canonical), knobs.dump()}), {threshold_file, scenes_file}, [&] {
            const auto images = parse_canonical(read_json(canonical));
            const auto outcome = analyze(images, cfg);
            std::vector<json> records;
            for (const auto& s : outcome.scenes) records.push_back(scene_to_json(s));
            write_file(threshold_file, dump_json(outcome.threshold.to_json()));
            write_file(scenes_file, to_jsonl(records));
        });
    }

    // caption
    {
        const LlmConfig llm = in_stage("caption", [&] { return resolve_llm_config(cfg); });
        const auto exemplar_path = cfg.exemplars ? fs::path(*cfg.exemplars) : default_exemplar_path();
        std::vector<std::string> parts = {"caption", read_file(scenes_file), read_file(exemplar_path), llm.endpoint,
                                          llm.model, json(llm.temperature).dump()};
        if (llm.is_mock()) parts.push_back(read_file(llm.endpoint.substr(kMockPrefix.size())));
        stage("caption", hash_parts(parts), {captions_file, prompts_file}, [&] {
            const auto exemplars = load_exemplars(exemplar_path.string());
            std::vector<SceneDescription> scenes;
            for (const auto& j : read_jsonl(scenes_file)) scenes.push_back(scene_from_json(j));
            auto transport = llm_transport ? llm_transport : make_transport(llm);
            ChatClient client(llm, transport);
            std::vector<PromptBundle> prompts;
            const auto records = caption_scenes(scenes, exemplars, client, cfg.workers, &prompts);
            std::vector<json> out, prompt_json;
            for (const auto& r : records) out.push_back(r.to_json());
            for (const auto& p : prompts) prompt_json.push_back(bundle_to_json(p));
            write_file(captions_file, to_jsonl(out));
            write_file(prompts_file, to_jsonl(prompt_json));
        });
    }

    // select
    {
        const json knobs = {{"endpoint", cfg.scorer.endpoint}, {"wq", cfg.scorer.wq}, {"wd", cfg.scorer.wd}, {"k", cfg.scorer.k}};
        stage("select", hash_parts({"select", read_file(captions_file), knobs.dump()}), {selected_file}, [&] {
            std::vector<CaptionRecord> records;
            for (const auto& j : read_jsonl(captions_file)) records.push_back(CaptionRecord::from_json(j));
            auto active = scorer ? std::move(scorer) : make_scorer(cfg.scorer);
            const auto selections = select_captions(records, cfg.scorer, *active, cfg.workers);
            std::vector<json> out;
            for (const auto& s : selections) out.push_back(s.to_json());
            write_file(selected_file, to_jsonl(out));
        });
    }
    return summary;
}

}  // namespace arsic
