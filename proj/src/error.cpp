#include "talab/error.hpp"

namespace talab {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::PrecisionOverflow: return "PrecisionOverflow";
        case ErrorKind::PrecisionMismatch: return "PrecisionMismatch";
        case ErrorKind::DivisionByZero: return "DivisionByZero";
        case ErrorKind::RangeError: return "RangeError";
        case ErrorKind::DomainError: return "DomainError";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::BadDimension: return "BadDimension";
        case ErrorKind::DegenerateRow: return "DegenerateRow";
        case ErrorKind::TraceUnavailable: return "TraceUnavailable";
        case ErrorKind::UnknownSymbol: return "UnknownSymbol";
        case ErrorKind::MalformedPairSet: return "MalformedPairSet";
        case ErrorKind::BalanceUnreachable: return "BalanceUnreachable";
        case ErrorKind::BadTable: return "BadTable";
        case ErrorKind::DataFormatError: return "DataFormatError";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
    }
    return "Unknown";
}

}  // namespace talab
