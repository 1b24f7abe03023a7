#pragma once

#include <stdexcept>
#include <string>

namespace opack {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// malformed inputs: dimension mismatches, bad layouts, schema violations
struct InvalidInput : Error {
    explicit InvalidInput(const std::string& what) : Error(what) {}
};

// geometric impossibility: body cannot fit, containment set empty
struct InfeasibleError : Error {
    explicit InfeasibleError(const std::string& what) : Error(what) {}
};

// iterative procedure failed to converge or solver returned an unusable status
struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(what) {}
};

} // namespace opack
