#include "wam/core/param_store.hpp"

#include "wam/core/errors.hpp"

namespace wam::core {

void ParamStore::create(const std::string& name, Tensor value) {
    if (entries_.count(name)) throw ContractError("parameter already exists: " + name);
    value.ensure_finite("parameter " + name);
    entries_.emplace(name, std::move(value));
    ++version_;
}

bool ParamStore::has(const std::string& name) const { return entries_.count(name) > 0; }

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("no such parameter: " + name);
    return it->second;
}

void ParamStore::update(const std::string& name, const std::vector<double>& data) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("no such parameter: " + name);
    if (data.size() != it->second.size()) {
        throw DimensionError("update size mismatch for " + name);
    }
    it->second.vec_data() = data;
    it->second.ensure_finite("parameter " + name);
    ++version_;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

} // namespace wam::core
