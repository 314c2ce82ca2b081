#include "int2int/corpus.hpp"

#include <fstream>
#include <thread>
#include <unordered_set>

#include "int2int/dataset.hpp"
#include "int2int/errors.hpp"

namespace int2int {

Lines read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open " + path.string());
    Lines lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

void write_lines(const std::filesystem::path& path, const Lines& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

Lines generate_corpus(const Task& task, std::size_t count, std::int64_t base_seed, int workers, std::int64_t max_len) {
    if (workers < 1) throw ConfigError("num_workers must be >= 1");
    std::vector<Lines> blocks(static_cast<std::size_t>(workers));
    std::vector<std::exception_ptr> errors(blocks.size());
    {
        std::vector<std::jthread> threads;
        for (int w = 0; w < workers; ++w) {
            const std::size_t share =
                count / static_cast<std::size_t>(workers) + (static_cast<std::size_t>(w) < count % workers ? 1 : 0);
            threads.emplace_back([&, w, share] {
                try {
                    GeneratedStream stream(task, RngStream(base_seed, w, 0), Split::train, max_len);
                    auto& block = blocks[static_cast<std::size_t>(w)];
                    block.reserve(share);
                    for (std::size_t i = 0; i < share; ++i) {
                        const Example ex = stream.next();
                        std::string line = write_example(ex.input, ex.output);
                        line.pop_back();
                        block.push_back(std::move(line));
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    Lines out;
    out.reserve(count);
    for (auto& b : blocks) {
        for (auto& l : b) out.push_back(std::move(l));
    }
    return out;
}

Lines concat_files(const std::vector<std::filesystem::path>& inputs) {
    Lines out;
    for (const auto& p : inputs) {
        auto lines = read_lines(p);
        out.insert(out.end(), std::make_move_iterator(lines.begin()), std::make_move_iterator(lines.end()));
    }
    return out;
}

Lines shuffle_lines(Lines lines, std::int64_t seed) {
    RngStream rng(seed, 0, 0);
    for (std::size_t i = lines.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(lines[i - 1], lines[j]);
    }
    return lines;
}

Lines dedupe_lines(const Lines& lines) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(lines.size());
    Lines out;
    for (const auto& l : lines) {
        if (seen.insert(l).second) out.push_back(l);
    }
    return out;
}

CorpusSplit split_lines(const Lines& lines, std::size_t valid_size, std::size_t test_size) {
    if (valid_size + test_size > lines.size()) {
        throw InsufficientData("corpus has " + std::to_string(lines.size()) + " lines, valid + test need " +
                               std::to_string(valid_size + test_size));
    }
    CorpusSplit s;
    const auto b = lines.begin();
    const auto test_start = lines.end() - static_cast<std::ptrdiff_t>(test_size);
    s.valid.assign(b, b + static_cast<std::ptrdiff_t>(valid_size));
    s.train.assign(b + static_cast<std::ptrdiff_t>(valid_size), test_start);
    s.test.assign(test_start, lines.end());
    return s;
}

PipelineReport run_pipeline(const std::vector<std::filesystem::path>& inputs, const std::string& output_prefix,
                            std::int64_t seed, std::size_t valid_size, std::size_t test_size, bool dedupe) {
    PipelineReport r;
    Lines lines = concat_files(inputs);
    r.raw = lines.size();
    write_lines(output_prefix + ".raw", lines);
    lines = shuffle_lines(std::move(lines), seed);
    if (dedupe) {
        lines = dedupe_lines(lines);
        r.duplicates = r.raw - lines.size();
    }
    write_lines(output_prefix + ".shuf", lines);
    const auto split = split_lines(lines, valid_size, test_size);
    write_lines(output_prefix + ".valid", split.valid);
    write_lines(output_prefix + ".test", split.test);
    write_lines(output_prefix + ".train", split.train);
    r.valid = split.valid.size();
    r.test = split.test.size();
    r.train = split.train.size();
    return r;
}

}  // namespace int2int
