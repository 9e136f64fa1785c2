#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wam/core/tensor.hpp"

namespace wam::core {

/// Named parameter tensors plus an optimizer step counter. Names are unique
/// and shapes are fixed at creation; values change only through update().
/// A version counter tracks mutations so recorded computations can detect
/// staleness.
class ParamStore {
public:
    void create(const std::string& name, Tensor value);
    bool has(const std::string& name) const;
    const Tensor& get(const std::string& name) const;

    /// Overwrites the value of an existing entry; shape must match.
    /// Bumps the mutation version.
    void update(const std::string& name, const std::vector<double>& data);

    /// Names in lexicographic order (the canonical serialization order).
    std::vector<std::string> names() const;
    std::size_t count() const { return entries_.size(); }

    std::uint64_t step() const { return step_; }
    void bump_step() { ++step_; }
    void set_step(std::uint64_t s) { step_ = s; }

    std::uint64_t version() const { return version_; }

private:
    std::map<std::string, Tensor> entries_;
    std::uint64_t step_ = 0;
    std::uint64_t version_ = 0;
};

} // namespace wam::core
