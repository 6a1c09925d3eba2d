#pragma once

#include <stdexcept>
#include <string>

namespace sds {

/// Malformed input file (CSV or model document).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file or selection that turned out to contain no rows.
class EmptyInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sds
