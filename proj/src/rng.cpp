#include "qig/rng.hpp"

#include "qig/common.hpp"

#include <cstdio>

namespace qig {

std::string Rng::serialize() const {
    char buf[4 * 16 + 4];
    std::snprintf(buf, sizeof(buf), "%016llx:%016llx:%016llx:%016llx",
                  static_cast<unsigned long long>(state_[0]),
                  static_cast<unsigned long long>(state_[1]),
                  static_cast<unsigned long long>(state_[2]),
                  static_cast<unsigned long long>(state_[3]));
    return std::string(buf);
}

Rng Rng::deserialize(const std::string& hex) {
    Rng rng;
    unsigned long long w[4];
    const int got = std::sscanf(hex.c_str(), "%llx:%llx:%llx:%llx", &w[0], &w[1], &w[2], &w[3]);
    QIG_CHECK(got == 4, "bad rng state string: '", hex, "'");
    for (int i = 0; i < 4; ++i) {
        rng.state_[i] = w[i];
    }
    return rng;
}

} // namespace qig
