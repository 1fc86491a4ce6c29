#pragma once

#include <stdexcept>
#include <string>

namespace vggsvm {

/// Caller violated an operation's precondition (bad shape, bad argument,
/// malformed dataset layout). Tools map this to exit code 2.
class PreconditionError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure while doing otherwise valid work: I/O, decoding, divergence.
/// Tools map this to exit code 3.
class RuntimeFailure : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A persisted artifact (feature file, checkpoint, model file) failed validation.
class FormatError : public RuntimeFailure
{
public:
    enum class Kind
    {
        BadMagic,
        UnsupportedVersion,
        BadHeader,
        Truncated,
        ChecksumMismatch,
    };

    FormatError(Kind kind, const std::string& what) : RuntimeFailure(what), kind_(kind) {}

    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace vggsvm
