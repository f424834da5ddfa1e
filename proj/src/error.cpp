// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "arsic/error.hpp"

namespace arsic {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NonFiniteCoordinate: return "NonFiniteCoordinate";
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::EmptyAnnotation: return "EmptyAnnotation";
        case ErrorCode::NotFeatureCollection: return "NotFeatureCollection";
        case ErrorCode::MalformedBounds: return "MalformedBounds";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::TooFewMembers: return "TooFewMembers";
        case ErrorCode::InconsistentClustering: return "InconsistentClustering";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::HttpStatus: return "HttpStatus";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::NoListFound: return "NoListFound";
        case ErrorCode::UnterminatedString: return "UnterminatedString";
        case ErrorCode::NonStringElement: return "NonStringElement";
        case ErrorCode::EmptyList: return "EmptyList";
        case ErrorCode::ScorerUnavailable: return "ScorerUnavailable";
        case ErrorCode::EmbeddingDimensionMismatch: return "EmbeddingDimensionMismatch";
        case ErrorCode::AllFiltered: return "AllFiltered";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::NoReferences: return "NoReferences";
        case ErrorCode::NoOverlap: return "NoOverlap";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::Config: return "Config";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, std::string message, std::optional<std::int64_t> detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(detail) {}

}  // namespace arsic
