#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "int2int/errors.hpp"
#include "int2int/logparse.hpp"
#include "support/temp_dir.hpp"

using namespace int2int;
using int2int::testing::TempDir;

TEST_CASE("step lines have the fixed report format") {
    CHECK(format_step_line(200, 745.83, 10411.3, 0.9012, 1e-4) ==
          "    200 -  745.83 examples/s - 10411.30 words/s - ARITHMETIC:  0.9012 - LR: 1.0000e-04");
}

TEST_CASE("metric keys split into set and name") {
    CHECK(split_metric_key("valid_arithmetic_acc_1") == std::pair<std::string, std::string>{"valid", "acc_1"});
    CHECK(split_metric_key("test2_arithmetic_xe_loss") == std::pair<std::string, std::string>{"test2", "xe_loss"});
    CHECK(split_metric_key("train_loss") == std::pair<std::string, std::string>{"train", "train_loss"});
}

TEST_CASE("random metric records survive the log round trip exactly") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::ostringstream log;
    std::vector<MetricsRecord> written;
    for (int e = 0; e < 200; ++e) {
        MetricsRecord m{{"epoch", e}, {"train_loss", u(gen) * 3}};
        for (int c = 0; c < 12; ++c) m["valid_arithmetic_acc_" + std::to_string(c)] = u(gen);
        m["valid_arithmetic_acc"] = u(gen) / 3.0;
        m["valid_arithmetic_xe_loss"] = std::ldexp(u(gen), -static_cast<int>(gen() % 60));
        written.push_back(m);
        log << "INFO - 10/18/26 10:00:00 - 0:00:01 - " << format_metrics_line(m) << "\n";
        log << "INFO - 10/18/26 10:00:00 - 0:00:01 - " << format_step_line(e, 1.5, 2.5, u(gen), 1e-4) << "\n";
        log << "INFO - 10/18/26 10:00:00 - 0:00:01 - some other line\n";
    }
    std::istringstream in(log.str());
    const auto parsed = parse_log(in, "x");
    REQUIRE(parsed.epochs.size() == written.size());
    for (std::size_t i = 0; i < written.size(); ++i) REQUIRE(parsed.epochs[i] == written[i]);
    CHECK(parsed.steps.size() == 200);
    CHECK(parsed.warnings.empty());
}

TEST_CASE("damaged metric lines produce warnings") {
    std::istringstream in("INFO - x - __log__:{\"epoch\": 1,\n INFO - y - __log__:{\"epoch\":2.0}\n");
    const auto parsed = parse_log(in, "x");
    CHECK(parsed.epochs.size() == 1);
    CHECK(parsed.warnings.size() == 1);
}

TEST_CASE("tables over several experiment directories") {
    TempDir dir;
    for (const char* id : {"a", "b"}) {
        std::filesystem::create_directories(dir / id);
        std::ofstream out(dir / id / "train.log");
        out << "INFO - t - " << format_metrics_line({{"epoch", 0}, {"train_loss", 0.5}, {"valid_arithmetic_acc", 0.25}})
            << "\n";
        out << "INFO - t - " << format_metrics_line({{"epoch", 1}, {"train_loss", 0.25}, {"valid_arithmetic_acc", 0.75}})
            << "\n";
    }
    const std::vector<ParsedLog> logs{parse_log_file(dir / "a"), parse_log_file(dir / "b" / "train.log")};
    CHECK(logs[0].exp_id == "a");
    CHECK(logs[1].exp_id == "b");
    const auto table = metrics_table(logs);
    std::istringstream rows(table);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(rows, line)) lines.push_back(line);
    REQUIRE(lines.size() == 9);
    CHECK(lines[0].rfind("exp_id,epoch,set", 0) == 0);
    CHECK(table.find("a,1,valid") != std::string::npos);
    CHECK(table.find("0.75") != std::string::npos);
    CHECK_FALSE(text_plot(logs, "valid_arithmetic_acc").empty());
    CHECK_THROWS_AS(parse_log_file(dir / "missing"), FileError);
}
