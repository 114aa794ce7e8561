#pragma once

#include <stdexcept>
#include <string>

namespace eafpmed {

// Base for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or precondition violation; message names the offending dimension.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Malformed file, unsupported format, or bad dataset layout.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Prompt could not be resolved against the registered pool keys.
class PromptError : public Error {
public:
    explicit PromptError(const std::string& msg) : Error(msg) {}
};

// Loss became non-finite during optimization.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, int epoch) : Error(msg), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

}  // namespace eafpmed
