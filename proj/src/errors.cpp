#include "stressfuse/errors.hpp"

namespace stressfuse {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::numeric_input: return "numeric_input";
    case ErrorKind::parse: return "parse";
    case ErrorKind::schema: return "schema";
    case ErrorKind::io: return "io";
    case ErrorKind::corrupt_file: return "corrupt_file";
    case ErrorKind::version_mismatch: return "version_mismatch";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::missing_modality: return "missing_modality";
    case ErrorKind::empty_result: return "empty_result";
    case ErrorKind::undefined_metric: return "undefined_metric";
    }
    return "unknown";
}

} // namespace stressfuse
