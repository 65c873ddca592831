#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace atc::scenario {

// mt19937_64 with explicit uniform mappings so identical seeds give identical
// streams on every platform (std:: distributions vary by vendor).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    double uniform(double lo, double hi) {
        double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }

    // Inclusive bounds.
    int uniform_int(int lo, int hi) {
        double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
        int v = lo + static_cast<int>(u * (static_cast<double>(hi) - static_cast<double>(lo) + 1.0));
        return v > hi ? hi : v;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}

} // namespace atc::scenario
