// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace laser {

// Failure categories surfaced by the library. Each maps onto one of the
// documented error conditions of the public operations.
enum class ErrorKind {
    MalformedHeader,
    NonFiniteValue,
    DimensionMismatch,
    ZeroRow,
    IoFailure,
    AllInfinite,
    TableMismatch,
    SigmaNotOne,
    SizeExceeded,
    DegenerateOutputLength,
    EmptyBatch,
    ShapeMismatch,
    NonFiniteGrad,
    TooShortSequence,
    NoPositives,
    NonFiniteLoss,
    InvalidArgument,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace laser
