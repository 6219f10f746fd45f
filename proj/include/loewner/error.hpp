#pragma once

#include <stdexcept>
#include <string>

namespace loewner {

// Caller supplied something that violates an operation's contract.
struct precondition_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Family jets are truncated below the order a computation needs.
struct insufficient_order_error : precondition_error {
    int needed;
    insufficient_order_error(const std::string& what, int needed_order) : precondition_error(what), needed(needed_order) {}
};

// Malformed serialized input (bad JSON shape, missing fields).
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A numerical routine could not reach its requested tolerance.
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace loewner
