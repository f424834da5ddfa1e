// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "arsic/select.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <tuple>

#include "arsic/error.hpp"
#include "arsic/llm_io.hpp"
#include "arsic/text.hpp"

using nlohmann::json;

namespace arsic {

void ScorerConfig::validate() const {
    if (endpoint.empty()) throw Error(ErrorCode::Config, "scorer.endpoint must be a URL or \"offline\"");
    if (!(wq >= 0) || !(wd >= 0) || std::abs(wq + wd - 1.0) > 1e-9) {
        throw Error(ErrorCode::Config, "scorer weights wq and wd must be non-negative and sum to 1");
    }
    if (k < 1) throw Error(ErrorCode::Config, "scorer.k must be at least 1");
    if (!(timeout_s > 0)) throw Error(ErrorCode::Config, "scorer.timeout_s must be positive");
}

std::optional<std::string> banned_reason(std::string_view caption) {
    static const std::regex group_id(R"(\bgroups?\s*(#|no\.?|number)?\s*\d+)", std::regex::icase);
    static const std::regex ordinal(
        R"(\b(first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth|eleventh|twelfth|thirteenth|)"
        R"(fourteenth|fifteenth|last|\d+(st|nd|rd|th))\s+(groups?|clusters?)\b)",
        std::regex::icase);
    static const std::regex cluster_id(R"(\bclusters?\s*(#|no\.?|number)?\s*\d+)", std::regex::icase);

    const std::string s(caption);
    if (std::regex_search(s, group_id)) return "group-id";
    if (std::regex_search(s, ordinal)) return "ordinal";
    if (std::regex_search(s, cluster_id)) return "cluster-id";
    return std::nullopt;
}

FilterResult filter_keywords(std::span<const std::string> captions) {
    FilterResult out;
    for (const auto& c : captions) {
        if (auto reason = banned_reason(c)) {
            out.rejected.emplace_back(c, std::move(*reason));
        } else {
            out.kept.push_back(c);
        }
    }
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::EmbeddingDimensionMismatch,
                    "embedding sizes differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double OfflineScorer::score(const std::string& caption, const std::string& image_ref) {
    const std::uint64_t h = fnv1a64(caption, fnv1a64(image_ref + '\x1f'));
    return static_cast<double>(h % 2000001ULL) / 1000000.0 - 1.0;
}

EmbeddingScorer::EmbeddingScorer(ScorerConfig cfg, std::shared_ptr<HttpTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {}

std::vector<double> EmbeddingScorer::embed(const json& body, const std::string& what) {
    HttpRequest request;
    request.url = cfg_.endpoint;
    request.body = body.dump();
    request.timeout_s = cfg_.timeout_s;
    request.headers.emplace_back("Content-Type", "application/json");

    HttpResponse response;
    try {
        response = transport_->post(request);
    } catch (const TransportFailure& e) {
        throw Error(ErrorCode::ScorerUnavailable, std::string("embedding request failed: ") + e.what());
    }
    if (response.status < 200 || response.status >= 300) {
        throw Error(ErrorCode::ScorerUnavailable, "scorer answered HTTP " + std::to_string(response.status) + " for " + what,
                    response.status);
    }
    try {
        const auto doc = json::parse(response.body);
        auto v = doc.at("embedding").get<std::vector<double>>();
        if (v.empty()) throw Error(ErrorCode::ScorerUnavailable, "empty embedding for " + what);
        return v;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, "malformed embedding response for " + what + ": " + e.what());
    }
}

double EmbeddingScorer::score(const std::string& caption, const std::string& image_ref) {
    std::vector<double> image;
    {
        std::lock_guard lock(mu_);
        const auto it = image_cache_.find(image_ref);
        if (it != image_cache_.end()) image = it->second;
    }
    if (image.empty()) {
        image = embed(json{{"image_ref", image_ref}}, "image " + image_ref);
        std::lock_guard lock(mu_);
        image_cache_.emplace(image_ref, image);
    }
    const auto text = embed(json{{"text", caption}}, "caption");
    return cosine_similarity(image, text);
}

std::unique_ptr<QualityScorer> make_scorer(const ScorerConfig& cfg) {
    if (cfg.is_offline()) return std::make_unique<OfflineScorer>();
    return std::make_unique<EmbeddingScorer>(cfg, std::make_shared<HttplibTransport>());
}

namespace {

using TermCounts = std::map<std::string, double>;

TermCounts unigrams_and_bigrams(std::string_view text) {
    const auto tokens = tokenize(text);
    TermCounts counts;
    for (std::size_t n = 1; n <= 2; ++n) {
        for (auto& g : ngrams(tokens, n)) counts[std::move(g)] += 1.0;
    }
    return counts;
}

}  // namespace

double diversity_score(std::string_view caption, std::span<const std::string> corpus) {
    if (corpus.empty()) return 1.0;

    const TermCounts cand = unigrams_and_bigrams(caption);
    std::vector<TermCounts> docs;
    docs.reserve(corpus.size());
    for (const auto& c : corpus) docs.push_back(unigrams_and_bigrams(c));

    std::map<std::string, double> df;
    for (const auto& [term, count] : cand) df[term] += 1.0;
    for (const auto& d : docs) {
        for (const auto& [term, count] : d) df[term] += 1.0;
    }
    const double n_docs = static_cast<double>(corpus.size() + 1);
    const auto idf = [&](const std::string& term) { return std::log((n_docs + 1.0) / (df[term] + 1.0)) + 1.0; };

    double cand_norm = 0;
    for (const auto& [term, count] : cand) cand_norm += std::pow(count * idf(term), 2);
    if (cand_norm == 0) return 1.0;

    double best = 0;
    for (const auto& d : docs) {
        if (d == cand) {
            best = 1.0;
            break;
        }
        double dot = 0, norm = 0;
        for (const auto& [term, count] : d) {
            const double w = count * idf(term);
            norm += w * w;
            const auto it = cand.find(term);
            if (it != cand.end()) dot += w * it->second * idf(term);
        }
        if (norm > 0) best = std::max(best, dot / (std::sqrt(norm) * std::sqrt(cand_norm)));
    }
    return std::clamp(1.0 - best, 0.0, 1.0);
}

double final_score(double quality, double diversity, double wq, double wd) {
    const double raw = wq * (quality + 1.0) / 2.0 + wd * diversity;
    // Snap to a 1e-12 grid so decimal-equal scores compare equal and tie-break by text.
    return std::round(raw * 1e12) / 1e12;
}

std::vector<CaptionCandidate> combine_and_select(std::vector<CaptionCandidate> candidates, const ScorerConfig& cfg) {
    std::vector<CaptionCandidate> ranked;
    std::vector<CaptionCandidate> filtered;
    for (auto& c : candidates) {
        c.selected = false;
        if (c.filtered) {
            c.final_score.reset();
            filtered.push_back(std::move(c));
        } else {
            c.final_score = final_score(c.quality, c.diversity, cfg.wq, cfg.wd);
            ranked.push_back(std::move(c));
        }
    }
    if (ranked.empty()) throw Error(ErrorCode::AllFiltered, "every caption was rejected by the keyword filter");

    std::sort(ranked.begin(), ranked.end(), [](const CaptionCandidate& l, const CaptionCandidate& r) {
        if (*l.final_score != *r.final_score) return *l.final_score > *r.final_score;
        return std::tie(l.text, l.original_index) < std::tie(r.text, r.original_index);
    });
    for (std::size_t i = 0; i < ranked.size() && i < cfg.k; ++i) ranked[i].selected = true;

    std::sort(filtered.begin(), filtered.end(),
              [](const CaptionCandidate& l, const CaptionCandidate& r) { return l.original_index < r.original_index; });
    ranked.insert(ranked.end(), std::make_move_iterator(filtered.begin()), std::make_move_iterator(filtered.end()));
    return ranked;
}

json candidate_to_json(const CaptionCandidate& c) {
    json j = {{"text", c.text}, {"filtered", c.filtered}};
    if (c.filtered) j["reason"] = c.reason;
    j["quality"] = c.quality;
    j["diversity"] = c.diversity;
    j["final"] = c.final_score ? json(*c.final_score) : json(nullptr);
    j["selected"] = c.selected;
    return j;
}

}  // namespace arsic
