#pragma once

#include <stdexcept>
#include <string>

namespace pcg {

// Failure categories used across the library. Tests match on the code, not
// the message text.
enum class Errc {
    NotFound,
    CorruptHeader,
    UnsupportedFormat,
    IoError,
    ParseError,
    UnknownLabel,
    NonMonotonicTime,
    InvalidRate,
    InvalidBand,
    EmptyInput,
    RecordingTooShort,
    WindowTooShort,
    NoPeriodEstimate,
    TooFewBeats,
    InsufficientS1Events,
    InvalidGroundTruth,
    EmptyList,
    InvalidSpec,
    InvalidConfig,
    MissingPair,
    InvalidArgument,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace pcg
