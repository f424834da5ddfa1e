// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace arsic {

/// Lowercases ASCII letters and splits on every run of non-alphanumeric bytes.
std::vector<std::string> tokenize(std::string_view text);

/// Space-joined n-grams of order n, in sentence order.
std::vector<std::string> ngrams(const std::vector<std::string>& tokens, std::size_t n);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace arsic
