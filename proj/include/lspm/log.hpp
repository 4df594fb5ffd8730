#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace lspm::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level parse_level(std::string_view s, Level fallback = Level::Warn) {
    if (s == "error") return Level::Error;
    if (s == "warn" || s == "warning") return Level::Warn;
    if (s == "info") return Level::Info;
    if (s == "debug") return Level::Debug;
    return fallback;
}

namespace detail {
inline Level& threshold() {
    static Level level = [] {
        const char* env = std::getenv("LSPM_LOG");
        return env ? parse_level(env) : Level::Warn;
    }();
    return level;
}
inline std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}
inline const char* tag(Level l) {
    switch (l) {
        case Level::Error: return "error";
        case Level::Warn: return "warn";
        case Level::Info: return "info";
        case Level::Debug: return "debug";
    }
    return "?";
}
}  // namespace detail

inline void set_level(Level l) { detail::threshold() = l; }
inline Level level() { return detail::threshold(); }
inline bool enabled(Level l) { return static_cast<int>(l) <= static_cast<int>(detail::threshold()); }

inline void write(Level l, std::string_view msg) {
    if (!enabled(l)) return;
    std::lock_guard<std::mutex> lock(detail::sink_mutex());
    std::cerr << "[lspm " << detail::tag(l) << "] " << msg << '\n';
}

inline void error(std::string_view m) { write(Level::Error, m); }
inline void warn(std::string_view m) { write(Level::Warn, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void debug(std::string_view m) { write(Level::Debug, m); }

}  // namespace lspm::log
