#pragma once

#include <cstdint>
#include <random>

namespace tubepi {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed of the independent stream for (seed, sample index, channel). Streams
// depend only on these three numbers, never on execution order.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t channel) {
    return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ (channel * 0xd1b54a32d192ed03ULL));
}

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t index, std::uint64_t channel = 0)
        : engine_(stream_seed(seed, index, channel)) {}
    explicit RandomStream(std::uint64_t raw_seed) : engine_(splitmix64(raw_seed)) {}

    double gaussian() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace tubepi
