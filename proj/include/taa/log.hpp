#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace taa::log {

enum class Level { debug = 0, info = 1, warning = 2, error = 3, off = 4 };

inline std::atomic<Level>& threshold()
{
    static std::atomic<Level> level{Level::info};
    return level;
}

inline void set_level(Level l) { threshold().store(l); }

inline void write(Level l, std::string_view msg)
{
    if (l < threshold().load()) return;
    static std::mutex mu;
    static constexpr const char* tags[] = {"debug", "info", "warning", "error"};
    std::lock_guard lock(mu);
    std::clog << '[' << tags[static_cast<int>(l)] << "] " << msg << '\n';
}

inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warning, msg); }
inline void debug(std::string_view msg) { write(Level::debug, msg); }

} // namespace taa::log
