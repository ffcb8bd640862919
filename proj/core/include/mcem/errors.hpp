#pragma once

#include <stdexcept>
#include <string>

namespace mcem {

// Base class for everything this library throws on purpose.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: config files, CLI values, invalid algorithm settings.
// The CLI maps these to exit code 2.
struct config_error : error {
    using error::error;
};

// A model was asked for an operation it does not support.
struct capability_error : error {
    using error::error;
};

// A parameter vector left its domain (e.g. a variance hit zero).
// Messages name the offending component.
struct domain_error : error {
    using error::error;
};

// An iterative numeric procedure failed to converge or was handed
// unusable numbers. The CLI maps these to exit code 1.
struct numeric_error : error {
    using error::error;
};

// File I/O failure; messages carry the path involved.
struct io_error : error {
    using error::error;
};

} // namespace mcem
