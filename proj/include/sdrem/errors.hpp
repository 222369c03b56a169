#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdrem {

/// Invalid run configuration or hyper-parameters.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line` is 1-based, 0 when not line-specific.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what), line_(line)
    {
    }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A model state that cannot be sampled from (inconsistent dimensions or
/// latent variables outside their support).
class StateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sdrem
