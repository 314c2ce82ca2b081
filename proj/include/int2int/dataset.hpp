#pragma once

// Corpus files, padded batches, and the training samplers.
//
// File format: one example per line, input and output token lists separated
// by a single tab, tokens separated by single spaces, LF line endings.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "int2int/generators.hpp"
#include "int2int/tokenizer.hpp"

namespace int2int {

struct Example {
    TokenSeq input;
    TokenSeq output;
    std::optional<int> class_id;

    friend bool operator==(const Example& a, const Example& b) {
        return a.input == b.input && a.output == b.output;
    }
};

struct ExampleSet {
    std::vector<Example> examples;
    std::string source;

    [[nodiscard]] std::size_t size() const { return examples.size(); }
    [[nodiscard]] bool empty() const { return examples.empty(); }
};

struct ReadReport {
    std::size_t lines = 0;
    std::size_t malformed = 0;
    std::size_t too_long = 0;
    std::vector<std::size_t> malformed_line_numbers;  // 1-based
};

/// Parses one corpus line (without its newline). Throws MalformedLine.
Example parse_example_line(std::string_view line);

/// Reads at most `limit` examples (all when negative). Examples with a side
/// longer than `max_len` tokens are skipped when `max_len` > 0. Malformed
/// lines are skipped and counted in `report`.
ExampleSet read_examples(const std::filesystem::path& path, std::int64_t limit = -1, std::int64_t max_len = -1,
                         ReadReport* report = nullptr);

std::string write_example(std::span<const Token> input, std::span<const Token> output);
void write_examples(const std::filesystem::path& path, const ExampleSet& set);

/// Row-major matrix of token ids.
struct IdMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<TokenId> data;

    IdMatrix() = default;
    IdMatrix(std::size_t r, std::size_t c, TokenId fill) : rows(r), cols(c), data(r * c, fill) {}
    TokenId& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    TokenId operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const TokenId> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    friend bool operator==(const IdMatrix&, const IdMatrix&) = default;
};

/// Both sides are framed as `<s> tokens <s>` and padded with the pad id to
/// the longest sequence of the batch. Lengths include the two markers.
struct Batch {
    IdMatrix input_ids;
    IdMatrix output_ids;
    std::vector<std::size_t> input_lengths;
    std::vector<std::size_t> output_lengths;

    [[nodiscard]] std::size_t size() const { return input_lengths.size(); }
    /// Number of predicted tokens (output length minus the start marker).
    [[nodiscard]] std::size_t target_tokens() const;
};

Batch make_batch(std::span<const Example> examples, const Vocabulary& vocab);
IdSeq frame_ids(std::span<const Token> tokens, const Vocabulary& vocab);

enum class SamplerMode { uniform, two_class, sequential };

struct SamplerConfig {
    SamplerMode mode = SamplerMode::uniform;
    std::size_t first_class_size = 0;
    double first_class_prob = 0.0;

    /// Throws ConfigError when the configuration cannot sample `dataset_size` examples.
    void validate(std::size_t dataset_size) const;
};

/// Picks training indices from an in-memory set. Uniform and two-class modes
/// sample with replacement; sequential walks the set in order and wraps.
class ExampleSampler {
public:
    ExampleSampler(SamplerConfig config, std::size_t dataset_size);

    std::size_t next_index(RngStream& rng);
    [[nodiscard]] std::size_t cursor() const { return cursor_; }
    void set_cursor(std::size_t c) { cursor_ = c % size_; }

private:
    SamplerConfig config_;
    std::size_t size_;
    std::size_t cursor_ = 0;
};

Batch next_training_batch(ExampleSampler& sampler, const ExampleSet& set, RngStream& rng, std::size_t batch_size,
                          const Vocabulary& vocab);

/// Reads a corpus file lazily, `reload_size` lines at a time, in file order,
/// restarting from the top after the last line.
class StreamingExampleReader {
public:
    StreamingExampleReader(std::filesystem::path path, std::size_t reload_size, std::int64_t max_len = -1);

    Example next();
    [[nodiscard]] std::uint64_t consumed() const { return consumed_; }
    /// Positions the reader after the first `n` examples of the stream.
    void skip(std::uint64_t n);

private:
    void reload();

    std::filesystem::path path_;
    std::size_t reload_size_;
    std::int64_t max_len_;
    std::ifstream in_;
    std::deque<Example> chunk_;
    std::uint64_t consumed_ = 0;
};

/// Draws tokenized examples from a task generator.
class GeneratedStream {
public:
    GeneratedStream(const Task& task, RngStream rng, Split split = Split::train, std::int64_t max_len = -1);

    Example next();
    std::vector<Example> take(std::size_t count);
    [[nodiscard]] RngStream& rng() { return rng_; }
    [[nodiscard]] std::uint64_t skipped_too_long() const { return skipped_; }

private:
    const Task* task_;
    RngStream rng_;
    Split split_;
    std::int64_t max_len_;
    std::uint64_t skipped_ = 0;
};

Example make_example(const Task& task, const Sample& sample);

/// Blocking FIFO with a fixed capacity; producers wait when it is full.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    bool push(T value) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [this] { return closed_ || items_.size() < capacity_; });
        if (closed_) return false;
        items_.push_back(std::move(value));
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [this] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        T value = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return value;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_full_.notify_all();
        not_empty_.notify_all();
    }

private:
    std::size_t capacity_;
    std::deque<T> items_;
    bool closed_ = false;
    std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
};

/// Generates examples on `n_workers` threads, each with its own random
/// stream (worker id = thread index), into a bounded queue.
class ParallelGenerator {
public:
    ParallelGenerator(const Task& task, std::int64_t base_seed, std::int64_t rank, int n_workers,
                      std::int64_t max_len = -1, std::size_t capacity = 4096);
    ~ParallelGenerator();
    ParallelGenerator(const ParallelGenerator&) = delete;
    ParallelGenerator& operator=(const ParallelGenerator&) = delete;

    Example next();

private:
    BoundedQueue<Example> queue_;
    std::vector<std::jthread> workers_;
};

/// Evaluation-set metric prefixes in file order: valid, test, test2, ...
std::string eval_set_prefix(std::size_t index);

}  // namespace int2int
