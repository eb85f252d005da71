#include "isbench/rng.hpp"

#include <cmath>

#include "isbench/error.hpp"

namespace isbench {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t root_seed, std::string seed_path)
    : root_(root_seed), path_(std::move(seed_path)) {
    std::uint64_t state = root_ ^ rotl(fnv1a64(path_), 17);
    for (auto& word : s_) word = splitmix64(state);
}

SeededRng SeededRng::child(std::string_view name) const {
    return SeededRng(root_, path_.empty() ? std::string(name) : path_ + "/" + std::string(name));
}

std::uint64_t SeededRng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

std::int64_t SeededRng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw Error(Errc::InvalidArgument, "uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
    if (span == ~std::uint64_t{0}) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t range = span + 1;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % range);
    std::uint64_t v;
    do v = next_u64();
    while (v >= limit);
    return lo + static_cast<std::int64_t>(v % range);
}

double SeededRng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

bool SeededRng::bernoulli(double p) { return uniform01() < p; }

double SeededRng::gaussian() {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u = 1.0 - uniform01();
    const double v = uniform01();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

}  // namespace isbench
