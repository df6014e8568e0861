#include "kgntm/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>

namespace kgntm {

namespace {

std::atomic<int> g_level{-1};
std::mutex g_mu;

} // namespace

LogLevel parse_log_level(std::string_view name)
{
    if (name == "error") return LogLevel::error;
    if (name == "info") return LogLevel::info;
    if (name == "debug") return LogLevel::debug;
    throw std::invalid_argument("unknown log level '" + std::string(name) + "' (expected error|info|debug)");
}

LogLevel log_level()
{
    int lv = g_level.load();
    if (lv < 0) {
        lv = static_cast<int>(LogLevel::info);
        if (const char* env = std::getenv("KGNTM_LOG")) {
            try {
                lv = static_cast<int>(parse_log_level(env));
            } catch (const std::invalid_argument&) {
                std::cerr << "[kgntm] ignoring KGNTM_LOG='" << env << "'\n";
            }
        }
        g_level.store(lv);
    }
    return static_cast<LogLevel>(lv);
}

void set_log_level(LogLevel level)
{
    g_level.store(static_cast<int>(level));
}

void log_message(LogLevel level, std::string_view msg)
{
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static constexpr const char* tags[] = {"error", "info", "debug"};
    std::lock_guard lock(g_mu);
    std::cerr << "[kgntm " << tags[static_cast<int>(level)] << "] " << msg << '\n';
}

} // namespace kgntm
