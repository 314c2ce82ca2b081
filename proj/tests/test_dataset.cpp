#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "int2int/dataset.hpp"
#include "int2int/errors.hpp"
#include "support/temp_dir.hpp"

using namespace int2int;
using int2int::testing::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Task gcd_task() {
    TaskSpec spec;
    spec.base = 10;
    spec.max_int = 10000;
    return Task(spec);
}

}  // namespace

TEST_CASE("parsing corpus lines") {
    const auto e = parse_example_line("+ 10 + 12\t+ 2");
    CHECK(e.input == TokenSeq{"+", "10", "+", "12"});
    CHECK(e.output == TokenSeq{"+", "2"});
    const auto ell = parse_example_line("+ 1 + 0 + 1 + 516 - 8 902\t2");
    CHECK(ell.input.size() == 11);
    CHECK(ell.output.size() == 1);
    CHECK_THROWS_AS(parse_example_line("+ 1 + 2"), MalformedLine);
    CHECK_THROWS_AS(parse_example_line("\t+ 2"), MalformedLine);
    CHECK_THROWS_AS(parse_example_line("+ 2\t"), MalformedLine);
}

TEST_CASE("write_example format") {
    CHECK(write_example(TokenSeq{"+", "10", "+", "12"}, TokenSeq{"+", "2"}) == "+ 10 + 12\t+ 2\n");
}

TEST_CASE("read_examples skips malformed and long lines and honors limit") {
    TempDir dir;
    write_text(dir / "d", "+ 1 + 2\t+ 1\nno tab here\n+ 1 2 3 4 5 6\t+ 1\n+ 4 + 6\t+ 2\n");
    ReadReport report;
    const auto all = read_examples(dir / "d", -1, 5, &report);
    CHECK(all.size() == 2);
    CHECK(report.lines == 4);
    CHECK(report.malformed == 1);
    CHECK(report.too_long == 1);
    CHECK(report.malformed_line_numbers == std::vector<std::size_t>{2});
    CHECK(read_examples(dir / "d", 1).size() == 1);
    CHECK(read_examples(dir / "d", -1, -1).size() == 3);
    CHECK_THROWS_AS(read_examples(dir / "missing"), FileError);
}

TEST_CASE("write, read, write round trip is byte exact over generated examples") {
    TempDir dir;
    const auto task = gcd_task();
    GeneratedStream stream(task, init_rng(5, 0, 0));
    ExampleSet set;
    set.examples = stream.take(10000);
    write_examples(dir / "a", set);
    const auto back = read_examples(dir / "a");
    REQUIRE(back.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) REQUIRE(back.examples[i] == set.examples[i]);
    write_examples(dir / "b", back);
    CHECK(read_text(dir / "a") == read_text(dir / "b"));
}

TEST_CASE("batches are framed and padded") {
    const auto vocab = gcd_task().vocabulary();
    const std::vector<Example> ex{parse_example_line("+ 1 + 2\t1"), parse_example_line("+ 3 0 + 6\t+ 1 2")};
    const auto b = make_batch(ex, vocab);
    CHECK(b.output_ids.cols == 5);
    CHECK(b.input_ids.cols == 7);
    CHECK(b.output_lengths == std::vector<std::size_t>{3, 5});
    CHECK(b.target_tokens() == 6);
    CHECK(b.output_ids(0, 0) == vocab.eos_id());
    CHECK(b.output_ids(0, 2) == vocab.eos_id());
    CHECK(b.output_ids(0, 3) == vocab.pad_id());
    CHECK(b.output_ids(1, 4) == vocab.eos_id());

    const auto single = make_batch(std::span(ex).first(1), vocab);
    CHECK(single.output_ids.cols == 3);
    CHECK(single.input_ids.cols == 6);

    const std::vector<Example> same(3, ex[1]);
    const auto rep = make_batch(same, vocab);
    for (std::size_t r = 1; r < 3; ++r) {
        CHECK(std::equal(rep.input_ids.row(r).begin(), rep.input_ids.row(r).end(), rep.input_ids.row(0).begin()));
        CHECK(std::equal(rep.output_ids.row(r).begin(), rep.output_ids.row(r).end(), rep.output_ids.row(0).begin()));
    }
    const std::vector<Example> bad{parse_example_line("+ 1 + x\t1")};
    CHECK_THROWS_AS(make_batch(bad, vocab), UnknownToken);
}

TEST_CASE("two-class sampler hits the first class at the configured rate") {
    SamplerConfig cfg{SamplerMode::two_class, 100, 0.5};
    ExampleSampler sampler(cfg, 1000);
    auto rng = init_rng(6, 0, 0);
    int first = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i)
        if (sampler.next_index(rng) < 100) ++first;
    CHECK(std::abs(first / static_cast<double>(draws) - 0.5) <= 0.02);
    CHECK_THROWS_AS(SamplerConfig({SamplerMode::two_class, 1000, 0.5}).validate(1000), ConfigError);
}

TEST_CASE("uniform sampler frequencies stay within five sigma") {
    const std::size_t n = 50;
    ExampleSampler sampler({}, n);
    auto rng = init_rng(7, 0, 0);
    std::vector<int> counts(n, 0);
    const int draws = static_cast<int>(n) * 1000;
    for (int i = 0; i < draws; ++i) ++counts[sampler.next_index(rng)];
    const double p = 1.0 / n;
    const double sigma = std::sqrt(draws * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - draws * p) <= 5 * sigma);
}

TEST_CASE("sequential sampler wraps at the end") {
    ExampleSampler sampler({SamplerMode::sequential, 0, 0.0}, 10);
    auto rng = init_rng(0, 0, 0);
    std::vector<std::size_t> got;
    for (int i = 0; i < 12; ++i) got.push_back(sampler.next_index(rng));
    CHECK(got == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 0, 1});
}

TEST_CASE("streaming reader reads in order and wraps") {
    TempDir dir;
    std::string text;
    for (int i = 0; i < 10; ++i) text += "+ " + std::to_string(i) + "\t+ 1\n";
    write_text(dir / "s", text);
    StreamingExampleReader reader(dir / "s", 3);
    std::vector<std::string> firsts;
    for (int i = 0; i < 12; ++i) firsts.push_back(reader.next().input[1]);
    CHECK(firsts == std::vector<std::string>{"0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "0", "1"});
    CHECK(reader.consumed() == 12);

    StreamingExampleReader skipped(dir / "s", 4);
    skipped.skip(13);
    CHECK(skipped.next().input[1] == "3");
}

TEST_CASE("generated streams are reproducible") {
    const auto task = gcd_task();
    GeneratedStream a(task, init_rng(8, 0, 0)), b(task, init_rng(8, 0, 0));
    const auto xa = a.take(500), xb = b.take(500);
    CHECK(xa.size() == 500);
    CHECK(xa == xb);
}

TEST_CASE("parallel generator yields valid examples") {
    const auto task = gcd_task();
    ParallelGenerator gen(task, 3, 0, 2);
    for (int i = 0; i < 200; ++i) {
        const auto e = gen.next();
        REQUIRE_FALSE(e.output.empty());
        REQUIRE(e.input.front() == "+");
    }
}

TEST_CASE("evaluation set prefixes") {
    CHECK(eval_set_prefix(0) == "valid");
    CHECK(eval_set_prefix(1) == "test");
    CHECK(eval_set_prefix(2) == "test2");
}
