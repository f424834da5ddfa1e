// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "arsic/metrics.hpp"
#include "arsic/text.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace arsic;
using namespace arsic::metrics;

namespace {

std::string random_sentence(std::mt19937_64& rng, const std::vector<std::string>& vocab) {
    std::string s;
    const std::size_t n = 3 + rng() % 10;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += vocab[rng() % vocab.size()];
    }
    return s;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

}  // namespace

TEST(Tokenize, LowercasesAndSplits) {
    EXPECT_EQ(tokenize("Two Ships, docked!"), (std::vector<std::string>{"two", "ships", "docked"}));
    EXPECT_EQ(tokenize("  "), std::vector<std::string>{});
    EXPECT_EQ(ngrams({"a", "b", "c"}, 2), (std::vector<std::string>{"a b", "b c"}));
    EXPECT_TRUE(ngrams({"a"}, 2).empty());
}

TEST(CorpusDf, CountsImagesNotOccurrences) {
    const std::vector<ReferenceSet> refs = {{"a a b", "a c"}, {"b d"}};
    const auto df = corpus_df(refs);
    EXPECT_EQ(df.documents, 2u);
    EXPECT_EQ(df.df[0].at("a"), 1.0);
    EXPECT_EQ(df.df[0].at("b"), 2.0);
    EXPECT_EQ(df.df[1].at("a a"), 1.0);
    EXPECT_ARSIC_ERROR(corpus_df(std::span<const ReferenceSet>{}), ErrorCode::EmptyCorpus);
}

TEST(CiderD, FixedPoints) {
    const std::vector<ReferenceSet> corpus = {{"a b c d f"}, {"x y z w v"}};
    const auto df = corpus_df(corpus);
    const std::vector<std::string> refs = {"a b c d f"};
    EXPECT_NEAR(cider_d("a b c d f", refs, df), 10.0, 1e-9);
    EXPECT_NEAR(cider_d("a b c d e", refs, df), 6.791666666666667, 1e-9);
    EXPECT_EQ(cider_d("q r s", refs, df), 0.0);
    EXPECT_EQ(cider_d("", refs, df), 0.0);
    EXPECT_ARSIC_ERROR(cider_d("a", std::span<const std::string>{}, df), ErrorCode::NoReferences);
}

TEST(CiderD, MatchesDirectOracleAndBounds) {
    std::mt19937_64 rng(71);
    const std::vector<std::string> vocab = {"ship", "harbor", "car", "road", "many", "two", "a", "near", "large", "plane"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ReferenceSet> corpus(2 + rng() % 5);
        for (auto& r : corpus) {
            r.resize(1 + rng() % 5);
            for (auto& s : r) s = random_sentence(rng, vocab);
        }
        const auto df = corpus_df(corpus);
        const auto& refs = corpus[rng() % corpus.size()];
        const auto cand = random_sentence(rng, vocab);
        const double got = cider_d(cand, refs, df);
        std::vector<std::vector<std::string>> ref_tokens;
        for (const auto& r : refs) ref_tokens.push_back(split(r));
        std::vector<std::vector<std::vector<std::string>>> corpus_tokens;
        for (const auto& set : corpus) {
            corpus_tokens.emplace_back();
            for (const auto& r : set) corpus_tokens.back().push_back(split(r));
        }
        EXPECT_NEAR(got, oracle::cider_d_direct(split(cand), ref_tokens, corpus_tokens), 1e-9);
        EXPECT_GE(got, 0.0);
        EXPECT_LE(got, 10.0);
        // reference order does not matter
        ReferenceSet reversed(refs.rbegin(), refs.rend());
        EXPECT_NEAR(cider_d(cand, reversed, df), got, 1e-12);
    }
}
