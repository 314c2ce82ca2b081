#include "int2int/logparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "int2int/errors.hpp"

namespace int2int {

std::string format_metrics_line(const MetricsRecord& metrics) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : metrics) j[k] = v;
    return std::string(kMetricsTag) + j.dump();
}

std::string format_step_line(std::int64_t step, double examples_per_s, double words_per_s, double loss, double lr) {
    return fmt::format("{:>7} - {:7.2f} examples/s - {:8.2f} words/s - ARITHMETIC: {:7.4f} - LR: {:.4e}", step,
                       examples_per_s, words_per_s, loss, lr);
}

std::pair<std::string, std::string> split_metric_key(const std::string& key) {
    static constexpr std::string_view infix = "_arithmetic_";
    const auto at = key.find(infix);
    if (at == std::string::npos || at == 0) return {"train", key};
    return {key.substr(0, at), key.substr(at + infix.size())};
}

ParsedLog parse_log(std::istream& in, std::string exp_id) {
    static const std::regex step_re(
        R"(-\s+(\d+) -\s+([0-9.eE+-]+|nan|inf) examples/s -\s+([0-9.eE+-]+|nan|inf) words/s - ARITHMETIC:\s+(\S+) - LR: (\S+)\s*$)");
    ParsedLog log;
    log.exp_id = std::move(exp_id);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto tag = line.find(kMetricsTag);
        if (tag != std::string::npos) {
            try {
                const auto j = nlohmann::json::parse(line.substr(tag + kMetricsTag.size()));
                if (!j.is_object()) throw std::runtime_error("not an object");
                MetricsRecord rec;
                for (const auto& [k, v] : j.items()) {
                    if (!v.is_number()) throw std::runtime_error("non-numeric value for " + k);
                    rec[k] = v.get<double>();
                }
                log.epochs.push_back(std::move(rec));
            } catch (const std::exception& e) {
                log.warnings.push_back(fmt::format("line {}: unreadable metrics ({})", number, e.what()));
            }
            continue;
        }
        if (line.find("ARITHMETIC:") != std::string::npos) {
            std::smatch m;
            if (!std::regex_search(line, m, step_re)) {
                log.warnings.push_back(fmt::format("line {}: unreadable training report", number));
                continue;
            }
            try {
                StepRecord s;
                s.step = std::stoll(m[1]);
                s.examples_per_s = std::stod(m[2]);
                s.words_per_s = std::stod(m[3]);
                s.loss = std::stod(m[4]);
                s.lr = std::stod(m[5]);
                log.steps.push_back(s);
            } catch (const std::exception&) {
                log.warnings.push_back(fmt::format("line {}: unreadable training report", number));
            }
        }
    }
    return log;
}

ParsedLog parse_log_file(const std::filesystem::path& path) {
    std::filesystem::path file = path;
    if (std::filesystem::is_directory(file)) file /= "train.log";
    std::ifstream in(file);
    if (!in) throw FileError("cannot open " + file.string());
    auto dir = std::filesystem::absolute(file).parent_path();
    return parse_log(in, dir.filename().string());
}

namespace {

std::string cell(double v) { return fmt::format("{}", v); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string metrics_table(const std::vector<ParsedLog>& logs) {
    std::set<std::string> columns;
    for (const auto& log : logs) {
        for (const auto& rec : log.epochs) {
            for (const auto& [k, v] : rec) {
                if (k != "epoch") columns.insert(split_metric_key(k).second);
            }
        }
    }
    std::string out = "exp_id,epoch,set";
    for (const auto& c : columns) out += "," + csv_field(c);
    out += "\n";
    for (const auto& log : logs) {
        for (std::size_t e = 0; e < log.epochs.size(); ++e) {
            const auto& rec = log.epochs[e];
            const auto ep = rec.find("epoch");
            const std::string epoch = ep != rec.end() ? cell(ep->second) : std::to_string(e);
            std::map<std::string, std::map<std::string, double>> by_set;
            for (const auto& [k, v] : rec) {
                if (k == "epoch") continue;
                const auto [set, name] = split_metric_key(k);
                by_set[set][name] = v;
            }
            for (const auto& [set, values] : by_set) {
                out += csv_field(log.exp_id) + "," + epoch + "," + csv_field(set);
                for (const auto& c : columns) {
                    const auto it = values.find(c);
                    out += ",";
                    if (it != values.end()) out += cell(it->second);
                }
                out += "\n";
            }
        }
    }
    return out;
}

std::string steps_table(const std::vector<ParsedLog>& logs) {
    std::string out = "exp_id,step,examples_per_s,words_per_s,loss,lr\n";
    for (const auto& log : logs) {
        for (const auto& s : log.steps) {
            out += fmt::format("{},{},{},{},{},{}\n", csv_field(log.exp_id), s.step, cell(s.examples_per_s),
                               cell(s.words_per_s), cell(s.loss), cell(s.lr));
        }
    }
    return out;
}

std::string text_plot(const std::vector<ParsedLog>& logs, const std::string& metric, int width, int height) {
    static constexpr std::string_view marks = "*o+x#@%&";
    struct Point {
        double x, y;
        std::size_t series;
    };
    std::vector<Point> points;
    for (std::size_t s = 0; s < logs.size(); ++s) {
        for (std::size_t e = 0; e < logs[s].epochs.size(); ++e) {
            const auto& rec = logs[s].epochs[e];
            const auto it = rec.find(metric);
            if (it == rec.end() || !std::isfinite(it->second)) continue;
            const auto ep = rec.find("epoch");
            points.push_back({ep != rec.end() ? ep->second : static_cast<double>(e), it->second, s});
        }
    }
    std::string out = metric + "\n";
    if (points.empty()) return out + "(no data)\n";
    width = std::max(width, 10);
    height = std::max(height, 4);
    auto [xmin_it, xmax_it] = std::minmax_element(points.begin(), points.end(), [](auto& a, auto& b) { return a.x < b.x; });
    auto [ymin_it, ymax_it] = std::minmax_element(points.begin(), points.end(), [](auto& a, auto& b) { return a.y < b.y; });
    const double xmin = xmin_it->x, xmax = xmax_it->x, ymin = ymin_it->y, ymax = ymax_it->y;
    std::vector<std::string> grid(static_cast<std::size_t>(height), std::string(static_cast<std::size_t>(width), ' '));
    for (const auto& p : points) {
        const int cx = xmax > xmin ? static_cast<int>(std::lround((p.x - xmin) / (xmax - xmin) * (width - 1))) : 0;
        const int cy = ymax > ymin ? static_cast<int>(std::lround((p.y - ymin) / (ymax - ymin) * (height - 1))) : 0;
        grid[static_cast<std::size_t>(height - 1 - cy)][static_cast<std::size_t>(cx)] = marks[p.series % marks.size()];
    }
    for (int r = 0; r < height; ++r) {
        const double label = ymax - (ymax - ymin) * r / (height - 1);
        out += fmt::format("{:>10.4g} |{}\n", label, grid[static_cast<std::size_t>(r)]);
    }
    out += std::string(11, ' ') + "+" + std::string(static_cast<std::size_t>(width), '-') + "\n";
    out += fmt::format("{:>12}{:<{}}{}\n", "", fmt::format("{:g}", xmin), width - 8, fmt::format("{:g}", xmax));
    for (std::size_t s = 0; s < logs.size(); ++s) out += fmt::format("  {} {}\n", marks[s % marks.size()], logs[s].exp_id);
    return out;
}

}  // namespace int2int
