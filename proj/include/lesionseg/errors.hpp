#ifndef LESIONSEG_ERRORS_HPP
#define LESIONSEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lesionseg {

// Malformed file contents (bad magic, truncated header, non-binary mask, ...).
class format_error : public std::runtime_error {
public:
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Well-formed but outside the supported subset (datatype, dimensionality, ...).
class unsupported_error : public std::runtime_error {
public:
    explicit unsupported_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with user-provided data: missing files, bad manifests, unsampleable
// training sets. Maps to CLI exit code 3.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration or parameter values. Maps to CLI exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace lesionseg

#endif
