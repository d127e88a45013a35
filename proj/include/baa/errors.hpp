#pragma once

#include <cstddef>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace baa {

/// Argument outside the domain where a formula is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An integral or expectation that does not converge for the given parameters.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary file parse failure; carries the byte offset where parsing stopped.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
    static WarningHandler handler = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

/// Install a sink for non-fatal diagnostics. Not thread-safe; set it once at startup.
inline void set_warning_handler(WarningHandler handler) { warning_handler() = std::move(handler); }

inline void warn(const std::string& msg) {
    if (auto& h = warning_handler()) h(msg);
}

}  // namespace baa
