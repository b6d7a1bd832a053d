#pragma once

#include <cstdint>
#include <cstdlib>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace persic {

// All recoverable failures surface as this exception; the CLI turns it into
// a one-line diagnostic and a nonzero exit code.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
    throw Error(detail::concat(std::forward<Args>(args)...));
}

// ---------------------------------------------------------------------------
// Logging. Verbosity comes from the PERSIC_LOG environment variable:
// "error", "warn" (default), "info", "debug".

enum class LogLevel : int { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("PERSIC_LOG");
        if (!env) return LogLevel::kWarn;
        std::string_view v(env);
        if (v == "error") return LogLevel::kError;
        if (v == "warn") return LogLevel::kWarn;
        if (v == "info") return LogLevel::kInfo;
        if (v == "debug") return LogLevel::kDebug;
        return LogLevel::kWarn;
    }();
    return level;
}

template <typename... Args>
void log_at(LogLevel level, const char* tag, Args&&... args) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    std::cerr << "[" << tag << "] " << detail::concat(std::forward<Args>(args)...) << "\n";
}

template <typename... Args>
void log_error(Args&&... args) { log_at(LogLevel::kError, "error", std::forward<Args>(args)...); }
template <typename... Args>
void log_warn(Args&&... args) { log_at(LogLevel::kWarn, "warn", std::forward<Args>(args)...); }
template <typename... Args>
void log_info(Args&&... args) { log_at(LogLevel::kInfo, "info", std::forward<Args>(args)...); }
template <typename... Args>
void log_debug(Args&&... args) { log_at(LogLevel::kDebug, "debug", std::forward<Args>(args)...); }

// ---------------------------------------------------------------------------
// Small numeric helpers shared across modules.

inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus(double x) {
    // ln(1 + e^x) without overflow on either tail.
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

// log sigma(x) via the softplus identity; exact on both tails.
inline double log_sigmoid(double x) { return -softplus(-x); }

// FNV-1a, used for deterministic name-derived rng substreams and checksums.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace persic
