#pragma once

#include <stdexcept>
#include <string>

namespace moc {

/// Raised when a spec, scenario or config violates a named constraint.
/// `constraint()` is a stable identifier (e.g. "parallel.dp_mod_ep") that
/// callers and the CLI surface verbatim.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string constraint, const std::string& message)
        : std::runtime_error(constraint + ": " + message), constraint_(std::move(constraint)) {}

    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChecksumMismatch : public StoreError {
public:
    explicit ChecksumMismatch(std::string key)
        : StoreError("checksum mismatch for key " + key), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class IncompleteVersion : public StoreError {
public:
    using StoreError::StoreError;
};

// A non-expert unit that no memory snapshot or stored version can supply.
class MissingUnit : public std::runtime_error {
public:
    explicit MissingUnit(std::string key)
        : std::runtime_error("no recovery source for unit " + key), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class UnrecoverableState : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace moc
