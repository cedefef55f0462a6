// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace scio {

enum class ErrorKind {
    OutOfBounds,
    InvalidSigma,
    InvalidArgument,
    EmptyInput,
    IndexError,
    ParseError,
    ValidationError,
    ConfigError,
    ShapeError,
    IoError,
    FormatError,
    EmptyDataset,
    MissingModel,
    NoVisibleKeypoints,
    SkeletonMismatch,
};

constexpr std::string_view to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::InvalidSigma: return "InvalidSigma";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::IndexError: return "IndexError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::MissingModel: return "MissingModel";
    case ErrorKind::NoVisibleKeypoints: return "NoVisibleKeypoints";
    case ErrorKind::SkeletonMismatch: return "SkeletonMismatch";
    }
    return "Unknown";
}

/// Single exception type for the library. `detail()` carries the short
/// machine-checkable tag (a header field, a violated invariant, a record
/// field) and `line()` is set for errors tied to a line of an input file.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string detail, std::string message = {},
          std::optional<std::size_t> line = std::nullopt)
        : std::runtime_error(format(kind, detail, message, line)),
          kind_(kind),
          detail_(std::move(detail)),
          line_(line) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    static std::string format(ErrorKind kind, const std::string& detail,
                              const std::string& message,
                              std::optional<std::size_t> line) {
        std::string s(to_string(kind));
        if (line) s += " at line " + std::to_string(*line);
        if (!detail.empty()) s += " (" + detail + ")";
        if (!message.empty()) s += ": " + message;
        return s;
    }

    ErrorKind kind_;
    std::string detail_;
    std::optional<std::size_t> line_;
};

}  // namespace scio
