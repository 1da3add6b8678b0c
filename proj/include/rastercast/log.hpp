#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace rastercast::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Verbosity comes from the RASTERCAST_LOG environment variable
// (error|warn|info|debug). Unset or unrecognized -> warn.
inline Level threshold() {
    static const Level lvl = [] {
        const char* env = std::getenv("RASTERCAST_LOG");
        if (env == nullptr) return Level::warn;
        if (std::strcmp(env, "error") == 0) return Level::error;
        if (std::strcmp(env, "warn") == 0) return Level::warn;
        if (std::strcmp(env, "info") == 0) return Level::info;
        if (std::strcmp(env, "debug") == 0) return Level::debug;
        return Level::warn;
    }();
    return lvl;
}

inline void emit(Level lvl, const std::string& msg) {
    if (lvl > threshold()) return;
    static constexpr const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[rastercast:%s] %s\n",
                 names[static_cast<int>(lvl)], msg.c_str());
}

inline void error(const std::string& msg) { emit(Level::error, msg); }
inline void warn(const std::string& msg) { emit(Level::warn, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }
inline void debug(const std::string& msg) { emit(Level::debug, msg); }

}  // namespace rastercast::log
