// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace arsic::metrics {

inline constexpr std::size_t kMaxOrder = 4;
inline constexpr double kDefaultSigma = 6.0;

/// N-gram counts for orders 1..4 (index 0 holds unigrams).
struct NGramStats {
    std::array<std::map<std::string, double>, kMaxOrder> counts;
    std::size_t length = 0;
};

NGramStats ngram_stats(std::string_view caption);

/// Document frequencies where one document is one image's whole reference set.
struct CorpusDf {
    std::array<std::map<std::string, double>, kMaxOrder> df;
    std::size_t documents = 0;

    double log_documents() const;
};

using ReferenceSet = std::vector<std::string>;

/// Throws EmptyCorpus when there is no image with at least one reference.
CorpusDf corpus_df(std::span<const ReferenceSet> references);

/// CIDEr-D of one candidate against one image's references, on the 0..10 scale:
/// clipped TF-IDF cosine per order, Gaussian length penalty, averaged over references and
/// orders, times 10. Unknown n-grams use df = 1.
double cider_d(std::string_view candidate, std::span<const std::string> references, const CorpusDf& df,
               double sigma = kDefaultSigma);

}  // namespace arsic::metrics
