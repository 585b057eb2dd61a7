// Error types shared across the runtime. Each maps to one failure family
// (bad index, bad shape, missing key, ...) so callers can catch precisely.
#pragma once

#include <stdexcept>
#include <string>

namespace lucy {

// Layer index or token id outside the vocabulary.
struct range_error : std::out_of_range {
    explicit range_error(const std::string& what) : std::out_of_range(what) {}
};

// Arity / length mismatch between containers that must line up.
struct shape_error : std::invalid_argument {
    explicit shape_error(const std::string& what) : std::invalid_argument(what) {}
};

// Unknown label in a token table.
struct lookup_error : std::out_of_range {
    explicit lookup_error(const std::string& what) : std::out_of_range(what) {}
};

// Operation called in the wrong session/conversation state.
struct state_error : std::logic_error {
    explicit state_error(const std::string& what) : std::logic_error(what) {}
};

// Missing or inconsistent configuration.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input while decoding a file, message, or token span.
// Carries the raw offending text when available.
struct parse_error : std::runtime_error {
    explicit parse_error(const std::string& what, std::string raw_span = {})
        : std::runtime_error(what), raw(std::move(raw_span)) {}
    std::string raw;
};

// Metric or math precondition violated (empty case list, zero rate, ...).
struct domain_error : std::invalid_argument {
    explicit domain_error(const std::string& what) : std::invalid_argument(what) {}
};

// Input record carries a value outside the configured domain.
struct data_error : std::runtime_error {
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// Tool name not present in the registry.
struct tool_not_found_error : std::runtime_error {
    explicit tool_not_found_error(std::string tool_name)
        : std::runtime_error("tool not found: " + tool_name), name(std::move(tool_name)) {}
    std::string name;
};

} // namespace lucy
