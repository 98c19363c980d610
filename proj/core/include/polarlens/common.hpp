#ifndef POLARLENS_COMMON_HPP
#define POLARLENS_COMMON_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace polarlens {

/// Base class for all toolkit errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unreadable/unwritable files, malformed binary headers.
struct io_error : error {
    using error::error;
};

/// A value outside its documented domain (e.g. toxicity outside [0,1]).
struct domain_error : error {
    using error::error;
};

/// Structurally degenerate input (rank-1 incidence, zero variance, ...).
struct degenerate_error : error {
    using error::error;
};

/// Bad pipeline configuration; maps to CLI exit code 2.
struct config_error : error {
    using error::error;
};

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on worker
/// threads. fn must only touch disjoint state per chunk; results that need
/// merging are the caller's problem. Runs inline when n is small.
inline void parallel_chunks(std::size_t n, std::size_t min_chunk,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    std::size_t chunks = n / std::max<std::size_t>(min_chunk, 1);
    std::size_t workers = std::min(hw, std::max<std::size_t>(chunks, 1));
    if (workers <= 1 || n < 2 * min_chunk) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t step = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t b = w * step;
        std::size_t e = std::min(n, b + step);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

} // namespace polarlens

#endif
