#pragma once

#include <stdexcept>
#include <string>

namespace ehcr {

// Invalid or inconsistent configuration values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A mathematical precondition was violated (negative power, d <= 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// API misuse: wrong vector length, stale cache, calling step before reset.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Replay memory holds fewer transitions than requested.
class NotReadyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ehcr
