// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace arsic {

class HttpTransport;

struct CaptionCandidate {
    std::string text;
    std::size_t original_index = 0;
    bool filtered = false;
    std::string reason;               // set when filtered
    double quality = 0;               // cosine in [-1, 1]
    double diversity = 0;             // [0, 1]
    std::optional<double> final_score;  // unfiltered candidates only
    bool selected = false;
};

inline constexpr std::string_view kOfflineScorer = "offline";

struct ScorerConfig {
    std::string endpoint{kOfflineScorer};
    double wq = 0.7;
    double wd = 0.3;
    std::size_t k = 5;
    double timeout_s = 30.0;

    bool is_offline() const { return endpoint == kOfflineScorer; }
    void validate() const;
};

/// Returns why a caption leaks group bookkeeping ("group-id", "ordinal", "cluster-id"), if it does.
std::optional<std::string> banned_reason(std::string_view caption);

struct FilterResult {
    std::vector<std::string> kept;
    std::vector<std::pair<std::string, std::string>> rejected;  // (caption, reason)
};

FilterResult filter_keywords(std::span<const std::string> captions);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Image/caption match in [-1, 1].
class QualityScorer {
public:
    virtual ~QualityScorer() = default;
    virtual double score(const std::string& caption, const std::string& image_ref) = 0;
};

/// Test-only stand-in: a deterministic FNV-1a hash of (image_ref, caption) mapped onto [-1, 1].
/// Carries no information about the image.
class OfflineScorer final : public QualityScorer {
public:
    double score(const std::string& caption, const std::string& image_ref) override;
};

/// Client for an external image/text embedding service:
///   POST {"image_ref": str} -> {"embedding": [...]}
///   POST {"text": str}      -> {"embedding": [...]}
/// Image embeddings are cached per image_ref.
class EmbeddingScorer final : public QualityScorer {
public:
    EmbeddingScorer(ScorerConfig cfg, std::shared_ptr<HttpTransport> transport);

    double score(const std::string& caption, const std::string& image_ref) override;

private:
    std::vector<double> embed(const nlohmann::json& body, const std::string& what);

    ScorerConfig cfg_;
    std::shared_ptr<HttpTransport> transport_;
    std::mutex mu_;
    std::map<std::string, std::vector<double>> image_cache_;
};

std::unique_ptr<QualityScorer> make_scorer(const ScorerConfig& cfg);

/// 1 - max cosine similarity between TF-IDF vectors of word 1- and 2-grams. IDF is
/// log((N+1)/(df+1)) + 1 over the corpus plus the candidate. Empty corpus gives 1.
double diversity_score(std::string_view caption, std::span<const std::string> corpus);

/// Weighted average with quality mapped onto [0, 1], quantized to 1e-12.
double final_score(double quality, double diversity, double wq, double wd);

/// Ranks unfiltered candidates by final score (descending; ties by text, then original index)
/// and flags the top k. Filtered candidates follow in their original order.
/// Throws AllFiltered when nothing survived the keyword filter.
std::vector<CaptionCandidate> combine_and_select(std::vector<CaptionCandidate> candidates, const ScorerConfig& cfg);

nlohmann::json candidate_to_json(const CaptionCandidate& c);

}  // namespace arsic
