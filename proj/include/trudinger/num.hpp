#pragma once

#include <charconv>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace trudinger {

/// Shortest decimal representation that round-trips through a double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Parses a full token as a double; rejects trailing characters.
inline double parse_double(std::string_view tok) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw std::runtime_error("invalid number: '" + std::string(tok) + "'");
    }
    return v;
}

inline long long parse_int(std::string_view tok) {
    long long v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw std::runtime_error("invalid integer: '" + std::string(tok) + "'");
    }
    return v;
}

/// |x|^{e-2} x with the removable singularity at x = 0 filled by 0
/// (valid for e > 1, the only range used here).
inline double signed_pow(double x, double e) {
    if (x == 0.0) return 0.0;
    return std::copysign(std::pow(std::abs(x), e - 1.0), x);
}

/// Runs fn(begin, end) over fixed chunks of [0, n). Chunk boundaries depend
/// only on n and the chunk count, so any caller that merges per-chunk results
/// in chunk order is deterministic regardless of the worker count.
inline void parallel_for_chunks(int n, int threads,
                                const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    int nw = threads;
    if (nw < 1) nw = 1;
    if (nw > n) nw = n;
    if (nw == 1) {
        fn(0, n);
        return;
    }
    // Fixed chunking: ceil(n/nw)-sized blocks.
    const int chunk = (n + nw - 1) / nw;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nw));
    for (int w = 0; w < nw; ++w) {
        const int b = w * chunk;
        const int e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back(fn, b, e);
    }
    for (auto& th : pool) th.join();
}

}  // namespace trudinger
