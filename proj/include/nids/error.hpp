#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nids {

// Base of every error the toolkit raises. The CLI maps subclasses onto exit
// statuses, so anything thrown from library code derives from this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user configuration or contract violation (e.g. autoencoder with IPs).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input document. `offset` is the byte position where parsing
// stopped, or npos when no position applies.
class ParseError : public Error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    ParseError(const std::string& what, std::size_t offset = npos)
        : Error(offset == npos ? what : what + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Data does not agree with a FeatureSchema or model.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Tensor shapes disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A NaN or infinity appeared where only finite values are allowed.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace nids
