#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace stressfuse {

enum class ErrorKind {
    invalid_argument,
    dimension_mismatch,
    numeric_input,
    parse,
    schema,
    io,
    corrupt_file,
    version_mismatch,
    divergence,
    missing_modality,
    empty_result,
    undefined_metric,
};

const char* error_kind_name(ErrorKind kind);

/// Single exception type for the whole library; `kind` maps 1:1 onto the
/// C API status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string message) {
    throw Error(kind, std::move(message));
}

} // namespace stressfuse
