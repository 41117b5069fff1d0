#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace helio {

/// Machine-readable error category. The CLI maps each to a distinct exit code.
enum class ErrorKind {
    domain,     // parameter outside its mathematical domain
    format,     // malformed or truncated file
    config,     // invalid configuration / numeric range
    input,      // invalid input data (empty cloud, points off-facet, ...)
    numerical,  // non-finite values during computation
    alignment,  // heliostat cannot be aligned for the requested scene
    usage,      // API misuse (tracing an unaligned scene, ...)
    empty_flux, // no rays reached the target window
    io,         // file system errors
};

constexpr std::string_view to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::format: return "format";
    case ErrorKind::config: return "config";
    case ErrorKind::input: return "input";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::usage: return "usage";
    case ErrorKind::empty_flux: return "empty_flux";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised by the binary readers; carries the byte offset where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string &what, std::size_t offset)
        : Error(ErrorKind::format, what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Raised by the optimizer; carries the iteration where the loss went non-finite.
class NumericalError : public Error {
public:
    NumericalError(const std::string &what, int iteration)
        : Error(ErrorKind::numerical, what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

} // namespace helio
