#pragma once

#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qig {

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <class T, class... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    format_into(os, rest...);
}
} // namespace detail

template <class... Args>
[[noreturn]] void fail(const Args&... args) {
    std::ostringstream os;
    detail::format_into(os, args...);
    throw Error(os.str());
}

#define QIG_CHECK(cond, ...)                                                   \
    do {                                                                       \
        if (!(cond)) {                                                         \
            ::qig::fail(__VA_ARGS__);                                          \
        }                                                                      \
    } while (0)

/// Worker cap for batch-parallel sections. Reads QIMAGEGEN_THREADS once.
std::size_t max_workers();

/// Runs fn(i) for i in [0, n). Results must go to per-index slots; any
/// reduction over them happens serially afterwards so the outcome is
/// identical for every worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace qig
