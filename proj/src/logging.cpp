#include "int2int/logging.hpp"

#include <atomic>

#include <fmt/format.h>
#include <spdlog/pattern_formatter.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace int2int {

std::string format_elapsed(std::chrono::steady_clock::duration d) {
    const auto s = std::chrono::duration_cast<std::chrono::seconds>(d).count();
    return fmt::format("{}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60);
}

namespace {

class ElapsedFlag final : public spdlog::custom_flag_formatter {
public:
    explicit ElapsedFlag(std::chrono::steady_clock::time_point start) : start_(start) {}

    void format(const spdlog::details::log_msg&, const std::tm&, spdlog::memory_buf_t& dest) override {
        const auto text = format_elapsed(std::chrono::steady_clock::now() - start_);
        dest.append(text.data(), text.data() + text.size());
    }

    std::unique_ptr<custom_flag_formatter> clone() const override { return std::make_unique<ElapsedFlag>(start_); }

private:
    std::chrono::steady_clock::time_point start_;
};

class LevelFlag final : public spdlog::custom_flag_formatter {
public:
    void format(const spdlog::details::log_msg& msg, const std::tm&, spdlog::memory_buf_t& dest) override {
        const std::string_view name = msg.level == spdlog::level::warn ? "WARNING" : "INFO";
        dest.append(name.data(), name.data() + name.size());
    }

    std::unique_ptr<custom_flag_formatter> clone() const override { return std::make_unique<LevelFlag>(); }
};

std::atomic<int> logger_counter{0};

}  // namespace

RunLogger::RunLogger(const std::filesystem::path& file, bool echo) : start_(std::chrono::steady_clock::now()) {
    std::vector<spdlog::sink_ptr> sinks;
    if (echo) sinks.push_back(std::make_shared<spdlog::sinks::stdout_sink_mt>());
    if (!file.empty()) sinks.push_back(std::make_shared<spdlog::sinks::basic_file_sink_mt>(file.string(), false));
    logger_ = std::make_shared<spdlog::logger>("run" + std::to_string(logger_counter++), sinks.begin(), sinks.end());
    auto formatter = std::make_unique<spdlog::pattern_formatter>();
    formatter->add_flag<LevelFlag>('L').add_flag<ElapsedFlag>('*', start_).set_pattern(
        "%L - %m/%d/%C %H:%M:%S - %* - %v");
    logger_->set_formatter(std::move(formatter));
    logger_->set_level(spdlog::level::info);
    logger_->flush_on(spdlog::level::info);
}

RunLogger::~RunLogger() {
    if (logger_) logger_->flush();
}

void RunLogger::info(const std::string& message) { logger_->info(message); }
void RunLogger::warn(const std::string& message) { logger_->warn(message); }
void RunLogger::flush() { logger_->flush(); }

}  // namespace int2int
