// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace arsic {

enum class ErrorCode : std::uint8_t {
    // ingest
    NonFiniteCoordinate,
    MalformedLine,
    EmptyAnnotation,
    NotFeatureCollection,
    MalformedBounds,
    SchemaViolation,
    // spatial
    EmptyGroup,
    DisconnectedGraph,
    EmptySample,
    // patterns
    TooFewMembers,
    InconsistentClustering,
    // llm_io
    Transport,
    HttpStatus,
    MalformedResponse,
    NoListFound,
    UnterminatedString,
    NonStringElement,
    EmptyList,
    // select
    ScorerUnavailable,
    EmbeddingDimensionMismatch,
    AllFiltered,
    // metrics
    EmptyCorpus,
    NoReferences,
    NoOverlap,
    // pipeline
    EmptyDataset,
    Config,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. `detail()` carries the location-ish
/// payload (line number, JSON path, feature index, HTTP status, byte offset).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::optional<std::int64_t> detail = std::nullopt);

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::int64_t> detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::optional<std::int64_t> detail_;
};

}  // namespace arsic
