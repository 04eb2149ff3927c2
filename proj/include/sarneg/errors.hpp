#pragma once

#include <stdexcept>
#include <string>

namespace sarneg {

/// Input data violates a documented invariant (corpus, queries, rankings).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or experiment configuration is out of range or inconsistent.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A referenced article, document, or node does not exist.
class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sarneg
