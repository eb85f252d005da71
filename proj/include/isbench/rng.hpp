#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace isbench {

/// xoshiro256** stream whose state is expanded with splitmix64 from the root
/// seed mixed with an FNV-1a hash of a hierarchical seed path such as
/// "run/dataset/case/instance/scheme/step". Every helper below is defined
/// here rather than through <random> distributions, whose output differs
/// between standard libraries.
class SeededRng {
public:
    SeededRng(std::uint64_t root_seed, std::string seed_path);

    /// Stream for `seed_path + "/" + name`.
    SeededRng child(std::string_view name) const;

    std::uint64_t next_u64();
    /// Uniform integer in [lo, hi] (inclusive), rejection sampled.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();
    /// Consumes exactly one value.
    bool bernoulli(double p);
    double gaussian();

    std::uint64_t root_seed() const noexcept { return root_; }
    const std::string& seed_path() const noexcept { return path_; }

private:
    std::uint64_t root_;
    std::string path_;
    std::array<std::uint64_t, 4> s_{};
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace isbench
