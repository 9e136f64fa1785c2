#pragma once

#include <stdexcept>
#include <string>

namespace wam::core {

/// Shape or layer-width mismatch; message names the offending layer/op.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value crossed a public boundary.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Caller violated an operation precondition.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// Recorded computation used after the parameters backing it changed.
class StalenessError : public std::runtime_error {
public:
    explicit StalenessError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad or missing configuration (unknown key, missing checkpoint, unknown kind).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem trouble (unreadable dataset, unwritable output path).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace wam::core
