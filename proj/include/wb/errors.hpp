#pragma once

#include <stdexcept>
#include <string>

namespace wb {

enum class ErrorKind {
    RationalTruncation,
    ResonanceDetected,
    ExponentOverflow,
    ScanTooLarge,
    GridTooCoarse,
    ZeroVector,
    OracleDivergence,
    ContractionFailure,
    StepDiverged,
    GuardViolation,
    SchemaMismatch,
    ValidationError,
};

const char* kind_name(ErrorKind k);

// Every library failure carries a kind so the CLI can map it to an exit code
// and a diagnostic document.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

}  // namespace wb
