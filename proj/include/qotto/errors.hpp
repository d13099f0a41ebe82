// Exception types shared across the library. The CLI maps them to exit codes
// (validation -> 2, numerical -> 3, I/O -> 4).
#pragma once

#include <stdexcept>
#include <string>

namespace qotto {

struct ValidationError : std::invalid_argument {
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qotto
