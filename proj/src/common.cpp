#include "paverl/common.hpp"

#include <sstream>

namespace paverl {

std::string Rng::save_state() const {
    std::ostringstream os;
    os << engine_;
    // The Box-Muller spare must survive bit-exactly or a resumed stream
    // diverges on its first normal() call.
    os << " " << (have_spare_ ? 1 : 0) << " " << doubles_to_hex(&spare_, 1);
    return os.str();
}

void Rng::load_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    int spare_flag = 0;
    std::string spare_hex;
    is >> spare_flag >> spare_hex;
    if (is.fail()) throw ValidationError("Rng::load_state: malformed state string");
    const std::vector<double> spare = hex_to_doubles(spare_hex);
    if (spare.size() != 1) throw ValidationError("Rng::load_state: malformed spare");
    have_spare_ = spare_flag != 0;
    spare_ = spare[0];
}

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ValidationError("hex_to_doubles: invalid hex digit");
}
}  // namespace

std::string doubles_to_hex(const double* data, std::size_t n) {
    std::string out;
    out.reserve(n * 16);
    for (std::size_t i = 0; i < n; ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(data[i]);
        for (int shift = 60; shift >= 0; shift -= 4) {
            out.push_back(kHexDigits[(bits >> shift) & 0xF]);
        }
    }
    return out;
}

std::vector<double> hex_to_doubles(const std::string& hex) {
    if (hex.size() % 16 != 0) {
        throw ValidationError("hex_to_doubles: length must be a multiple of 16");
    }
    std::vector<double> out(hex.size() / 16);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (std::size_t j = 0; j < 16; ++j) {
            bits = (bits << 4) | static_cast<std::uint64_t>(hex_value(hex[i * 16 + j]));
        }
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace paverl
