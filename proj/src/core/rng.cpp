#include "wam/core/rng.hpp"

#include <cmath>

namespace wam::core {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

RngStream::RngStream(std::string name, std::uint64_t seed)
    : name_(std::move(name)), seed_(seed) {
    state_ = seed_ ^ fnv1a64(name_);
    // Burn one mix so nearby seeds decorrelate.
    (void)splitmix64(state_);
}

std::uint64_t RngStream::next_u64() {
    ++draws_;
    return splitmix64(state_);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
    // Box-Muller; u1 bounded away from 0 so log stays finite.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<double> RngStream::normal_vec(std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = normal();
    return out;
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
    if (n == 0) return 0;
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
}

RngStream RngStream::child(const std::string& sub) const {
    std::string child_name = name_ + "/" + sub;
    std::uint64_t mix = seed_ ^ (fnv1a64(child_name) * 0x9E3779B97F4A7C15ULL);
    return RngStream(child_name, mix);
}

} // namespace wam::core
