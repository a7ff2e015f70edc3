#ifndef MEDNER_UTIL_LOG_HPP
#define MEDNER_UTIL_LOG_HPP

#include <atomic>
#include <iostream>
#include <string_view>

namespace medner::log {

inline std::atomic<bool>& quiet_flag() {
    static std::atomic<bool> q{false};
    return q;
}

inline void set_quiet(bool q) { quiet_flag() = q; }

inline void warn(std::string_view msg) {
    if (!quiet_flag()) std::cerr << "warning: " << msg << '\n';
}

inline void info(std::string_view msg) {
    if (!quiet_flag()) std::cerr << msg << '\n';
}

}  // namespace medner::log

#endif  // MEDNER_UTIL_LOG_HPP
