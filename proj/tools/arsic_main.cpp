// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "arsic/error.hpp"
#include "arsic/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Flags shared by every subcommand that reads a PipelineConfig.
struct CommonFlags {
    std::string config_path;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> max_objects;
    std::optional<double> percentile;
    std::optional<double> penalty;
    std::optional<double> penalty_lambda;
    std::optional<double> threshold;
    std::optional<std::string> mock_responses;
    std::optional<std::string> endpoint;
    std::optional<std::string> model;
    std::optional<std::string> exemplars;
    std::optional<std::string> scorer;
    std::optional<double> wq;
    std::optional<std::size_t> k;

    arsic::PipelineConfig resolve() const {
        arsic::PipelineConfig cfg = config_path.empty() ? arsic::PipelineConfig{} : arsic::load_config(config_path);
        if (workers) cfg.workers = *workers;
        if (max_objects) cfg.max_objects = *max_objects;
        if (percentile) cfg.percentile = *percentile;
        if (penalty) cfg.penalty = *penalty;
        if (penalty_lambda) cfg.penalty_lambda = *penalty_lambda;
        if (threshold) cfg.threshold = *threshold;
        if (mock_responses) cfg.mock_responses = *mock_responses;
        if (endpoint) cfg.llm.endpoint = *endpoint;
        if (model) cfg.llm.model = *model;
        if (exemplars) cfg.exemplars = *exemplars;
        if (scorer) cfg.scorer.endpoint = *scorer;
        if (wq) {
            cfg.scorer.wq = *wq;
            cfg.scorer.wd = 1.0 - *wq;
        }
        if (k) cfg.scorer.k = *k;
        cfg.validate();
        return cfg;
    }
};

void add_config_flag(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--workers", f.workers, "worker threads");
}

void add_analysis_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--percentile", f.percentile, "MST edge-weight percentile used as cut threshold");
    cmd->add_option("--penalty", f.penalty, "absolute extra length between objects of different labels");
    cmd->add_option("--penalty-lambda", f.penalty_lambda, "penalty as a multiple of the mean raw MST edge");
    cmd->add_option("--threshold", f.threshold, "fixed cut threshold; skips percentile sampling");
}

void add_llm_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--mock-responses", f.mock_responses, "canned LLM responses (JSON) instead of a live endpoint");
    cmd->add_option("--endpoint", f.endpoint, "chat-completions URL");
    cmd->add_option("--model", f.model, "model name sent to the endpoint");
    cmd->add_option("--exemplars", f.exemplars, "few-shot exemplar file");
}

void add_scorer_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--scorer", f.scorer, "embedding scorer URL or 'offline'");
    cmd->add_option("--wq", f.wq, "quality weight (diversity weight is 1 - wq)");
    cmd->add_option("-k", f.k, "captions kept per image");
}

void print_json(const json& doc) { std::cout << doc.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Caption remote-sensing images from their object annotations"};
    app.require_subcommand(1);
    CommonFlags flags;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Normalize DOTA / xView / canonical annotations");
    std::vector<std::string> ingest_inputs;
    std::string format = "dota";
    std::string ingest_out;
    std::string ingest_report;
    std::string label_map;
    ingest->add_option("inputs", ingest_inputs, "annotation files or directories")->required();
    ingest->add_option("--format", format, "input format")->check(CLI::IsMember({"dota", "xview", "canonical"}));
    ingest->add_option("-o,--output", ingest_out, "canonical JSON output")->required();
    ingest->add_option("--report", ingest_report, "skip report (default: <output>.report.json)");
    ingest->add_option("--label-map", label_map, "xView type_id -> label JSON")->check(CLI::ExistingFile);
    ingest->add_option("--max-objects", flags.max_objects, "objects allowed per image");
    add_config_flag(ingest, flags);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Cluster objects and describe spatial relations");
    std::string canonical_in;
    std::string scenes_out;
    std::string threshold_out;
    std::string threshold_in;
    analyze->add_option("canonical", canonical_in, "canonical annotations")->required()->check(CLI::ExistingFile);
    analyze->add_option("-o,--output", scenes_out, "scenes JSONL output")->required();
    analyze->add_option("--threshold-out", threshold_out, "threshold stats output (default: <output dir>/threshold.json)");
    analyze->add_option("--threshold-file", threshold_in, "reuse saved threshold stats")->check(CLI::ExistingFile);
    add_analysis_flags(analyze, flags);
    add_config_flag(analyze, flags);

    // caption
    auto* caption = app.add_subcommand("caption", "Prompt the LLM for captions of every scene");
    std::string scenes_in;
    std::string captions_out;
    std::string dump_prompts;
    caption->add_option("scenes", scenes_in, "scenes JSONL")->required()->check(CLI::ExistingFile);
    caption->add_option("-o,--output", captions_out, "captions JSONL output")->required();
    caption->add_option("--dump-prompts", dump_prompts, "write every prompt as JSONL for audit");
    add_llm_flags(caption, flags);
    add_config_flag(caption, flags);

    // select
    auto* select = app.add_subcommand("select", "Filter, score and rank captions");
    std::string captions_in;
    std::string selected_out;
    select->add_option("captions", captions_in, "captions JSONL")->required()->check(CLI::ExistingFile);
    select->add_option("-o,--output", selected_out, "selection JSONL output")->required();
    add_scorer_flags(select, flags);
    add_config_flag(select, flags);

    // score
    auto* score = app.add_subcommand("score", "CIDEr-D of selected captions against references");
    std::string selected_in;
    std::string references_in;
    std::string scores_out;
    std::string summary_out;
    score->add_option("selected", selected_in, "selection JSONL")->required()->check(CLI::ExistingFile);
    score->add_option("references", references_in, "references JSON {image_id: [captions]}")
        ->required()
        ->check(CLI::ExistingFile);
    score->add_option("-o,--output", scores_out, "per-image scores JSONL");
    score->add_option("--summary", summary_out, "corpus summary JSON");

    // run
    auto* run = app.add_subcommand("run", "ingest -> analyze -> caption -> select into one directory");
    arsic::RunOptions run_opts;
    std::vector<std::string> run_inputs;
    std::string run_format = "dota";
    std::string run_label_map;
    std::string out_dir;
    run->add_option("inputs", run_inputs, "annotation files or directories")->required();
    run->add_option("--format", run_format, "input format")->check(CLI::IsMember({"dota", "xview", "canonical"}));
    run->add_option("--label-map", run_label_map, "xView type_id -> label JSON")->check(CLI::ExistingFile);
    run->add_option("--out-dir", out_dir, "artifact directory")->required();
    run->add_flag("--resume", run_opts.resume, "reuse stages whose inputs are unchanged");
    run->add_option("--max-objects", flags.max_objects, "objects allowed per image");
    add_analysis_flags(run, flags);
    add_llm_flags(run, flags);
    add_scorer_flags(run, flags);
    add_config_flag(run, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*ingest) {
            const auto cfg = flags.resolve();
            std::vector<fs::path> paths(ingest_inputs.begin(), ingest_inputs.end());
            const auto outcome =
                arsic::ingest_inputs(paths, arsic::parse_format(format),
                                     label_map.empty() ? std::nullopt : std::optional<fs::path>(label_map), cfg.max_objects);
            const json report = outcome.report(cfg.max_objects);
            arsic::write_file(ingest_out, arsic::dump_json(arsic::write_canonical(outcome.images)));
            arsic::write_file(ingest_report.empty() ? ingest_out + ".report.json" : ingest_report, arsic::dump_json(report));
            for (const auto& s : outcome.skipped) {
                std::cerr << "skipped " << s.image_id << ": " << s.object_count << " objects > " << cfg.max_objects << "\n";
            }
            if (outcome.dropped_features > 0) {
                std::cerr << "dropped " << outcome.dropped_features << " feature(s) with unmapped type_id\n";
            }
        } else if (*analyze) {
            const auto cfg = flags.resolve();
            std::optional<arsic::ThresholdInfo> preset;
            if (!threshold_in.empty()) preset = arsic::ThresholdInfo::from_json(arsic::read_json(threshold_in));
            const auto images = arsic::parse_canonical(arsic::read_json(canonical_in));
            const auto outcome = arsic::analyze(images, cfg, preset);
            std::vector<json> records;
            for (const auto& s : outcome.scenes) records.push_back(arsic::scene_to_json(s));
            arsic::write_file(scenes_out, arsic::to_jsonl(records));
            const fs::path tpath =
                threshold_out.empty() ? fs::path(scenes_out).parent_path() / "threshold.json" : fs::path(threshold_out);
            arsic::write_file(tpath, arsic::dump_json(outcome.threshold.to_json()));
        } else if (*caption) {
            const auto cfg = flags.resolve();
            const auto llm = arsic::resolve_llm_config(cfg);
            const auto exemplars = arsic::load_exemplars(cfg.exemplars);
            std::vector<arsic::SceneDescription> scenes;
            for (const auto& j : arsic::read_jsonl(scenes_in)) scenes.push_back(arsic::scene_from_json(j));
            arsic::ChatClient client(llm, arsic::make_transport(llm));
            std::vector<arsic::PromptBundle> prompts;
            const auto records = arsic::caption_scenes(scenes, exemplars, client, cfg.workers, &prompts);
            std::vector<json> out;
            std::size_t failures = 0;
            for (const auto& r : records) {
                out.push_back(r.to_json());
                if (r.error_code) {
                    ++failures;
                    std::cerr << r.image_id << ": " << *r.error_code << "\n";
                }
            }
            arsic::write_file(captions_out, arsic::to_jsonl(out));
            if (!dump_prompts.empty()) {
                std::vector<json> pj;
                for (const auto& p : prompts) pj.push_back(arsic::bundle_to_json(p));
                arsic::write_file(dump_prompts, arsic::to_jsonl(pj));
            }
            std::cerr << records.size() - failures << "/" << records.size() << " images captioned\n";
        } else if (*select) {
            const auto cfg = flags.resolve();
            std::vector<arsic::CaptionRecord> records;
            for (const auto& j : arsic::read_jsonl(captions_in)) records.push_back(arsic::CaptionRecord::from_json(j));
            auto scorer = arsic::make_scorer(cfg.scorer);
            const auto selections = arsic::select_captions(records, cfg.scorer, *scorer, cfg.workers);
            std::vector<json> out;
            for (const auto& s : selections) {
                out.push_back(s.to_json());
                if (s.error_code) std::cerr << s.image_id << ": " << *s.error_code << "\n";
            }
            arsic::write_file(selected_out, arsic::to_jsonl(out));
        } else if (*score) {
            std::vector<arsic::SelectionRecord> selections;
            for (const auto& j : arsic::read_jsonl(selected_in)) selections.push_back(arsic::SelectionRecord::from_json(j));
            const auto report = arsic::score_selections(selections, arsic::read_json(references_in));
            if (!scores_out.empty()) {
                std::vector<json> out;
                for (const auto& s : report.per_image) {
                    out.push_back({{"image_id", s.image_id}, {"candidate", s.candidate}, {"cider_d", s.cider_d}});
                }
                arsic::write_file(scores_out, arsic::to_jsonl(out));
            }
            if (!summary_out.empty()) arsic::write_file(summary_out, arsic::dump_json(report.summary()));
            print_json(report.summary());
        } else if (*run) {
            const auto cfg = flags.resolve();
            run_opts.inputs.assign(run_inputs.begin(), run_inputs.end());
            run_opts.format = arsic::parse_format(run_format);
            if (!run_label_map.empty()) run_opts.label_map = run_label_map;
            run_opts.out_dir = out_dir;
            const auto summary = arsic::run_pipeline(run_opts, cfg);
            print_json(json{{"executed", summary.executed}, {"reused", summary.reused}});
        }
    } catch (const arsic::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == arsic::ErrorCode::Config ? kExitUsage : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
