#include "int2int/dataset.hpp"

#include <algorithm>

#include "int2int/errors.hpp"

namespace int2int {

namespace {

bool too_long(const Example& ex, std::int64_t max_len) {
    return max_len > 0 && (static_cast<std::int64_t>(ex.input.size()) > max_len ||
                           static_cast<std::int64_t>(ex.output.size()) > max_len);
}

}  // namespace

Example parse_example_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw MalformedLine("no tab separator");
    Example ex;
    ex.input = split_tokens(line.substr(0, tab));
    ex.output = split_tokens(line.substr(tab + 1));
    if (ex.input.empty() || ex.output.empty()) throw MalformedLine("empty input or output");
    return ex;
}

ExampleSet read_examples(const std::filesystem::path& path, std::int64_t limit, std::int64_t max_len,
                         ReadReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open " + path.string());
    ExampleSet set;
    set.source = path.string();
    ReadReport local;
    std::string line;
    while ((limit < 0 || static_cast<std::int64_t>(set.examples.size()) < limit) && std::getline(in, line)) {
        ++local.lines;
        Example ex;
        try {
            ex = parse_example_line(line);
        } catch (const MalformedLine&) {
            ++local.malformed;
            local.malformed_line_numbers.push_back(local.lines);
            continue;
        }
        if (too_long(ex, max_len)) {
            ++local.too_long;
            continue;
        }
        set.examples.push_back(std::move(ex));
    }
    if (report) *report = std::move(local);
    return set;
}

std::string write_example(std::span<const Token> input, std::span<const Token> output) {
    std::string line = join_tokens(input);
    line += '\t';
    line += join_tokens(output);
    line += '\n';
    return line;
}

void write_examples(const std::filesystem::path& path, const ExampleSet& set) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& ex : set.examples) out << write_example(ex.input, ex.output);
    if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Batches

std::size_t Batch::target_tokens() const {
    std::size_t n = 0;
    for (auto len : output_lengths) n += len - 1;
    return n;
}

IdSeq frame_ids(std::span<const Token> tokens, const Vocabulary& vocab) {
    IdSeq ids;
    ids.reserve(tokens.size() + 2);
    ids.push_back(vocab.eos_id());
    for (const auto& t : tokens) ids.push_back(vocab.id(t));
    ids.push_back(vocab.eos_id());
    return ids;
}

Batch make_batch(std::span<const Example> examples, const Vocabulary& vocab) {
    if (examples.empty()) throw ConfigError("cannot batch an empty example list");
    std::vector<IdSeq> inputs, outputs;
    inputs.reserve(examples.size());
    outputs.reserve(examples.size());
    std::size_t in_width = 0, out_width = 0;
    for (const auto& ex : examples) {
        inputs.push_back(frame_ids(ex.input, vocab));
        outputs.push_back(frame_ids(ex.output, vocab));
        in_width = std::max(in_width, inputs.back().size());
        out_width = std::max(out_width, outputs.back().size());
    }
    Batch batch;
    batch.input_ids = IdMatrix(examples.size(), in_width, vocab.pad_id());
    batch.output_ids = IdMatrix(examples.size(), out_width, vocab.pad_id());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        std::copy(inputs[i].begin(), inputs[i].end(), batch.input_ids.data.begin() + i * in_width);
        std::copy(outputs[i].begin(), outputs[i].end(), batch.output_ids.data.begin() + i * out_width);
        batch.input_lengths.push_back(inputs[i].size());
        batch.output_lengths.push_back(outputs[i].size());
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Sampling

void SamplerConfig::validate(std::size_t dataset_size) const {
    if (dataset_size == 0) throw ConfigError("training set is empty");
    if (mode == SamplerMode::two_class) {
        if (first_class_size == 0 || first_class_size >= dataset_size) {
            throw ConfigError("two-class sampling needs 0 < first_class_size < dataset size (" +
                              std::to_string(dataset_size) + ")");
        }
        if (!(first_class_prob > 0.0 && first_class_prob < 1.0)) {
            throw ConfigError("two-class sampling needs 0 < first_class_prob < 1");
        }
    }
}

ExampleSampler::ExampleSampler(SamplerConfig config, std::size_t dataset_size)
    : config_(config), size_(dataset_size) {
    config_.validate(dataset_size);
}

std::size_t ExampleSampler::next_index(RngStream& rng) {
    switch (config_.mode) {
        case SamplerMode::uniform:
            return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(size_) - 1));
        case SamplerMode::two_class: {
            const auto first = static_cast<std::int64_t>(config_.first_class_size);
            if (rng.bernoulli(config_.first_class_prob)) return static_cast<std::size_t>(rng.uniform_int(0, first - 1));
            return static_cast<std::size_t>(rng.uniform_int(first, static_cast<std::int64_t>(size_) - 1));
        }
        case SamplerMode::sequential: {
            const std::size_t i = cursor_;
            cursor_ = (cursor_ + 1) % size_;
            return i;
        }
    }
    return 0;
}

Batch next_training_batch(ExampleSampler& sampler, const ExampleSet& set, RngStream& rng, std::size_t batch_size,
                          const Vocabulary& vocab) {
    std::vector<Example> picked;
    picked.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) picked.push_back(set.examples[sampler.next_index(rng)]);
    return make_batch(picked, vocab);
}

// ---------------------------------------------------------------------------
// Streaming file reader

StreamingExampleReader::StreamingExampleReader(std::filesystem::path path, std::size_t reload_size,
                                               std::int64_t max_len)
    : path_(std::move(path)), reload_size_(std::max<std::size_t>(reload_size, 1)), max_len_(max_len) {
    in_.open(path_, std::ios::binary);
    if (!in_) throw FileError("cannot open " + path_.string());
}

void StreamingExampleReader::reload() {
    std::string line;
    bool rewound = false;
    while (chunk_.size() < reload_size_) {
        if (!std::getline(in_, line)) {
            if (rewound) break;  // file holds no usable line
            if (!chunk_.empty()) break;
            in_.clear();
            in_.seekg(0);
            rewound = true;
            continue;
        }
        try {
            Example ex = parse_example_line(line);
            if (!too_long(ex, max_len_)) chunk_.push_back(std::move(ex));
        } catch (const MalformedLine&) {
        }
    }
    if (chunk_.empty()) throw InsufficientData("no usable examples in " + path_.string());
}

Example StreamingExampleReader::next() {
    if (chunk_.empty()) reload();
    Example ex = std::move(chunk_.front());
    chunk_.pop_front();
    ++consumed_;
    return ex;
}

void StreamingExampleReader::skip(std::uint64_t n) {
    for (std::uint64_t i = 0; i < n; ++i) next();
}

// ---------------------------------------------------------------------------
// Generated data

Example make_example(const Task& task, const Sample& sample) {
    Example ex;
    ex.input = task.encode_problem(sample.problem);
    ex.output = task.encode_solution(sample.solution);
    ex.class_id = task.code_class(sample.problem, sample.solution);
    return ex;
}

GeneratedStream::GeneratedStream(const Task& task, RngStream rng, Split split, std::int64_t max_len)
    : task_(&task), rng_(std::move(rng)), split_(split), max_len_(max_len) {
    if (!task.has_generator()) throw ConfigError("operation has no generator");
}

Example GeneratedStream::next() {
    while (true) {
        Example ex = make_example(*task_, task_->generate(rng_, split_));
        if (!too_long(ex, max_len_)) return ex;
        ++skipped_;
    }
}

std::vector<Example> GeneratedStream::take(std::size_t count) {
    std::vector<Example> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(next());
    return out;
}

ParallelGenerator::ParallelGenerator(const Task& task, std::int64_t base_seed, std::int64_t rank, int n_workers,
                                     std::int64_t max_len, std::size_t capacity)
    : queue_(capacity) {
    if (n_workers < 1) throw ConfigError("num_workers must be >= 1");
    for (int w = 0; w < n_workers; ++w) {
        workers_.emplace_back([this, &task, base_seed, rank, w, max_len](std::stop_token stop) {
            GeneratedStream stream(task, RngStream(base_seed, w, rank), Split::train, max_len);
            while (!stop.stop_requested()) {
                if (!queue_.push(stream.next())) return;
            }
        });
    }
}

ParallelGenerator::~ParallelGenerator() {
    for (auto& w : workers_) w.request_stop();
    queue_.close();
}

Example ParallelGenerator::next() {
    auto ex = queue_.pop();
    if (!ex) throw InsufficientData("generator queue closed");
    return std::move(*ex);
}

std::string eval_set_prefix(std::size_t index) {
    if (index == 0) return "valid";
    if (index == 1) return "test";
    return "test" + std::to_string(index);
}

}  // namespace int2int
