#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace paverl {

// Error taxonomy. CLI maps ValidationError/ConfigError/SchemaError to exit
// code 1 and RuntimeAbort to exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SequencingError : std::runtime_error {
    explicit SequencingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-recoverable runtime failures (NaN divergence, aborted training runs).
struct RuntimeAbort : std::runtime_error {
    explicit RuntimeAbort(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic RNG wrapper. All sampling goes through explicit algorithms on
// top of mt19937_64 so that streams are reproducible and serializable.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // Uniform in [0, 1) with 53 bits of entropy.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection-free modulo bias is negligible for
    // the small n used here, but rejection sampling keeps it exact.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw ValidationError("uniform_int: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t next_seed() { return engine_(); }

    std::string save_state() const;
    void load_state(const std::string& state);

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Bit-exact double <-> hex codec used by every model/checkpoint file.
std::string doubles_to_hex(const double* data, std::size_t n);
std::vector<double> hex_to_doubles(const std::string& hex);

// FNV-1a over a byte string; used as the model-file checksum.
std::uint64_t fnv1a64(const std::string& bytes);

// Locale-independent float formatting for CSV output.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace paverl
