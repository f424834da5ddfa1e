// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "arsic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "arsic/error.hpp"
#include "arsic/text.hpp"

namespace arsic::metrics {

namespace {

struct Vector {
    std::array<std::map<std::string, double>, kMaxOrder> weights;
    std::array<double, kMaxOrder> norms{};
    std::size_t length = 0;
};

Vector tfidf(const NGramStats& stats, const CorpusDf& df) {
    Vector v;
    v.length = stats.length;
    const double log_n = df.log_documents();
    for (std::size_t n = 0; n < kMaxOrder; ++n) {
        for (const auto& [gram, tf] : stats.counts[n]) {
            const auto it = df.df[n].find(gram);
            const double d = it == df.df[n].end() ? 1.0 : std::max(1.0, it->second);
            const double w = tf * (log_n - std::log(d));
            v.weights[n][gram] = w;
            v.norms[n] += w * w;
        }
        v.norms[n] = std::sqrt(v.norms[n]);
    }
    return v;
}

double similarity(const Vector& cand, const Vector& ref, std::size_t n, double sigma) {
    if (cand.norms[n] == 0 || ref.norms[n] == 0) return 0.0;
    double dot = 0;
    for (const auto& [gram, w] : cand.weights[n]) {
        const auto it = ref.weights[n].find(gram);
        if (it != ref.weights[n].end()) dot += std::min(w, it->second) * it->second;
    }
    const double delta = static_cast<double>(cand.length) - static_cast<double>(ref.length);
    return dot / (cand.norms[n] * ref.norms[n]) * std::exp(-(delta * delta) / (2.0 * sigma * sigma));
}

}  // namespace

NGramStats ngram_stats(std::string_view caption) {
    NGramStats stats;
    const auto tokens = tokenize(caption);
    stats.length = tokens.size();
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
        for (auto& g : ngrams(tokens, n)) stats.counts[n - 1][std::move(g)] += 1.0;
    }
    return stats;
}

double CorpusDf::log_documents() const { return std::log(static_cast<double>(documents)); }

CorpusDf corpus_df(std::span<const ReferenceSet> references) {
    CorpusDf out;
    for (const auto& refs : references) {
        if (refs.empty()) continue;
        ++out.documents;
        std::array<std::set<std::string>, kMaxOrder> seen;
        for (const auto& r : refs) {
            const auto stats = ngram_stats(r);
            for (std::size_t n = 0; n < kMaxOrder; ++n) {
                for (const auto& [gram, count] : stats.counts[n]) seen[n].insert(gram);
            }
        }
        for (std::size_t n = 0; n < kMaxOrder; ++n) {
            for (const auto& gram : seen[n]) out.df[n][gram] += 1.0;
        }
    }
    if (out.documents == 0) throw Error(ErrorCode::EmptyCorpus, "no image has any reference caption");
    return out;
}

double cider_d(std::string_view candidate, std::span<const std::string> references, const CorpusDf& df, double sigma) {
    if (references.empty()) throw Error(ErrorCode::NoReferences, "candidate has no reference captions");

    const Vector cand = tfidf(ngram_stats(candidate), df);
    std::array<double, kMaxOrder> per_order{};
    for (const auto& r : references) {
        const Vector ref = tfidf(ngram_stats(r), df);
        for (std::size_t n = 0; n < kMaxOrder; ++n) per_order[n] += similarity(cand, ref, n, sigma);
    }
    double total = 0;
    for (const double s : per_order) total += s;
    const double score = total / static_cast<double>(kMaxOrder) / static_cast<double>(references.size()) * 10.0;
    return std::clamp(score, 0.0, 10.0);
}

}  // namespace arsic::metrics
