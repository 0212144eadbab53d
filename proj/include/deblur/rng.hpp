#ifndef DEBLUR_RNG_HPP
#define DEBLUR_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace deblur {

// splitmix64; used to derive independent sub-stream seeds from (seed, index...) tuples.
inline uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t combine_seed(uint64_t a, uint64_t b) {
    return mix_seed(a ^ mix_seed(b));
}

inline uint64_t combine_seed(uint64_t a, uint64_t b, uint64_t c) {
    return combine_seed(combine_seed(a, b), c);
}

// Deterministic across platforms, unlike std::uniform_*_distribution.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(mix_seed(seed)) {}

    // uniform integer in [0, n)
    uint64_t next_below(uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    // uniform integer in [lo, hi] inclusive
    int64_t next_range(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(next_below(static_cast<uint64_t>(hi - lo + 1)));
    }

    // uniform real in [0, 1)
    double next_real() {
        return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace deblur

#endif
