// Error types shared across the toolkit. Validation errors cover bad inputs
// and violated preconditions; numerical errors cover solver-stage failures.

#ifndef EITSENSE_ERRORS_HPP
#define EITSENSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace eitsense {

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace eitsense

#endif
