#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wam::core {

/// Named, seeded random stream. Identical (name, seed) pairs produce identical
/// draw sequences on any platform with IEEE-754 doubles; the stream never
/// touches global state. Internally a splitmix64 sequence keyed by the pair.
class RngStream {
public:
    RngStream(std::string name, std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal();
    std::vector<double> normal_vec(std::size_t n);
    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

    /// Independent stream derived from this stream's identity (not its position).
    RngStream child(const std::string& sub) const;

    const std::string& name() const { return name_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t draws() const { return draws_; }

private:
    std::string name_;
    std::uint64_t seed_ = 0;
    std::uint64_t state_ = 0;
    std::uint64_t draws_ = 0;
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(const std::string& s);

} // namespace wam::core
