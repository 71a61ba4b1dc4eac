#pragma once

// Counter-based random numbers. A draw is a pure function of
// (seed, stream, index), so traces do not depend on call order.

#include <array>
#include <cmath>
#include <cstdint>

namespace regretlab {

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t key) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

    Block operator()(Block ctr) const noexcept {
        std::array<std::uint32_t, 2> k = key_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53U} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57U} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1], static_cast<std::uint32_t>(p0)};
            k[0] += 0x9E3779B9U;
            k[1] += 0xBB67AE85U;
        }
        return ctr;
    }

private:
    std::array<std::uint32_t, 2> key_;
};

/// Named substream of a seeded Philox generator.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint64_t stream) noexcept : cipher_(seed), stream_(stream) {}

    /// Uniform double in [0, 1) with 53 random bits, determined by `index` alone.
    double uniform(std::uint64_t index) const noexcept {
        const auto b = block(index);
        const std::uint64_t hi = b[0] >> 5, lo = b[1] >> 6;
        return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
    }

    Philox4x32::Block block(std::uint64_t index) const noexcept {
        return cipher_({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)});
    }

private:
    Philox4x32 cipher_;
    std::uint64_t stream_;
};

/// Sequential view over a CounterStream, for generators that consume many draws.
class SequentialStream {
public:
    SequentialStream(std::uint64_t seed, std::uint64_t stream) noexcept : stream_(seed, stream) {}

    double uniform() noexcept { return stream_.uniform(next_++); }
    /// Uniform on (0, 1], safe for logarithms.
    double uniform_pos() noexcept { return 1.0 - uniform(); }
    double exponential() noexcept { return -std::log(uniform_pos()); }
    std::uint64_t position() const noexcept { return next_; }

private:
    CounterStream stream_;
    std::uint64_t next_ = 0;
};

/// Substream ids used by the simulator and the generators.
namespace streams {
inline constexpr std::uint64_t rewards = 0;
inline constexpr std::uint64_t transitions = 1;
inline constexpr std::uint64_t instance = 2;
inline constexpr std::uint64_t actions = 3;
} // namespace streams

} // namespace regretlab
