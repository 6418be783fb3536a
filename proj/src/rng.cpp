#include "pomc/rng.hpp"

namespace pomc {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t path_id)
    : master_seed_(master_seed),
      path_id_(path_id),
      key_(mix64(mix64(master_seed + kGolden) ^ (path_id * 0xD1B54A32D192ED03ULL + kGolden))) {}

RngStream RngStream::substream(std::uint64_t key) const {
    return RngStream(master_seed_, mix64(path_id_ + kGolden) ^ mix64(key * 0xA24BAED4963EE407ULL + 1));
}

RngStream::result_type RngStream::operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() noexcept {
    const std::uint64_t bits = (*this)() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = (*this)();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = -n % n;
        while (low < threshold) {
            x = (*this)();
            m = static_cast<__uint128_t>(x) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace pomc
