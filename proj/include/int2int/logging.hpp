#pragma once

// Run log: every line reads "INFO - MM/DD/YY HH:MM:SS - H:MM:SS - message",
// the second stamp being time since the logger was created.

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

namespace spdlog {
class logger;
}

namespace int2int {

class RunLogger {
public:
    /// Logs to stdout when `echo` is set, and appends to `file` when non-empty.
    explicit RunLogger(const std::filesystem::path& file = {}, bool echo = true);
    ~RunLogger();
    RunLogger(const RunLogger&) = delete;
    RunLogger& operator=(const RunLogger&) = delete;

    void info(const std::string& message);
    void warn(const std::string& message);
    void flush();

    [[nodiscard]] std::chrono::steady_clock::time_point start() const { return start_; }

private:
    std::chrono::steady_clock::time_point start_;
    std::shared_ptr<spdlog::logger> logger_;
};

/// "H:MM:SS" as printed by a Python timedelta.
std::string format_elapsed(std::chrono::steady_clock::duration d);

}  // namespace int2int
