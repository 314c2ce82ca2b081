#pragma once

// Corpus preparation: generation to files, concatenation, shuffling,
// de-duplication and the valid/test/train split.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "int2int/generators.hpp"

namespace int2int {

using Lines = std::vector<std::string>;

/// Lines without their terminators. Throws FileError.
Lines read_lines(const std::filesystem::path& path);
/// Each line followed by LF. Throws IoError.
void write_lines(const std::filesystem::path& path, const Lines& lines);

/// `count` corpus lines from `workers` threads. Worker w owns the stream
/// RngStream(base_seed, w, 0) and produces a contiguous block; blocks are
/// concatenated in worker order. Examples with a side longer than max_len
/// (when positive) are redrawn.
Lines generate_corpus(const Task& task, std::size_t count, std::int64_t base_seed, int workers,
                      std::int64_t max_len = -1);

Lines concat_files(const std::vector<std::filesystem::path>& inputs);

/// Fisher-Yates permutation driven by RngStream(seed, 0, 0).
Lines shuffle_lines(Lines lines, std::int64_t seed);

/// Keeps the first occurrence of every line, in order.
Lines dedupe_lines(const Lines& lines);

struct CorpusSplit {
    Lines valid;
    Lines test;
    Lines train;
};

/// First `valid_size` lines, last `test_size` lines, and the rest.
/// Throws InsufficientData when the two held-out sets do not fit.
CorpusSplit split_lines(const Lines& lines, std::size_t valid_size, std::size_t test_size);

struct PipelineReport {
    std::size_t raw = 0;
    std::size_t duplicates = 0;
    std::size_t valid = 0;
    std::size_t test = 0;
    std::size_t train = 0;
};

/// concat -> shuffle -> (dedupe) -> split, writing <prefix>.raw (the
/// concatenation), .shuf (shuffled, deduplicated), .valid, .test and .train.
PipelineReport run_pipeline(const std::vector<std::filesystem::path>& inputs, const std::string& output_prefix,
                            std::int64_t seed, std::size_t valid_size, std::size_t test_size, bool dedupe);

}  // namespace int2int
