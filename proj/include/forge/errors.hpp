#pragma once

#include <stdexcept>
#include <string>

namespace forge {

/// Endpoint could not be reached or returned a non-success status.
/// Retried by the client up to max_attempts_per_call.
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Endpoint responded, but the payload violates the wire contract
/// (empty body, missing fields, inconsistent embedding dimension). Not retried.
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A model response does not match the expected structured format.
/// Callers usually treat this as a failed attempt, not a fatal error.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration, dataset schema violation, or bad CLI input.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace forge
