#include <doctest.h>

#include <set>

#include "int2int/corpus.hpp"
#include "int2int/dataset.hpp"
#include "int2int/errors.hpp"
#include "support/temp_dir.hpp"

using namespace int2int;
using int2int::testing::TempDir;

namespace {

Lines numbered(std::size_t n, std::size_t repeat_every = 0) {
    Lines out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("+ " + std::to_string(repeat_every ? i % repeat_every : i) + "\t+ 1");
    return out;
}

Task small_task() {
    TaskSpec spec;
    spec.base = 10;
    spec.max_int = 30;
    return Task(spec);
}

}  // namespace

TEST_CASE("generated corpora are deterministic and parse") {
    const auto task = small_task();
    const auto a = generate_corpus(task, 500, 4, 3);
    CHECK(a.size() == 500);
    CHECK(a == generate_corpus(task, 500, 4, 3));
    CHECK(a != generate_corpus(task, 500, 5, 3));
    for (const auto& l : a) CHECK_NOTHROW(parse_example_line(l));
}

TEST_CASE("shuffle is a seeded permutation") {
    const auto lines = numbered(1000);
    const auto s1 = shuffle_lines(lines, 9);
    CHECK(s1 == shuffle_lines(lines, 9));
    CHECK(s1 != lines);
    auto sorted = s1, orig = lines;
    std::sort(sorted.begin(), sorted.end());
    std::sort(orig.begin(), orig.end());
    CHECK(sorted == orig);
}

TEST_CASE("dedupe keeps first occurrences and is idempotent") {
    const Lines lines{"a", "b", "a", "c", "b", "a"};
    const auto d = dedupe_lines(lines);
    CHECK(d == Lines{"a", "b", "c"});
    CHECK(dedupe_lines(d) == d);
}

TEST_CASE("split takes the first and last lines as held-out sets") {
    const auto lines = numbered(100);
    const auto s = split_lines(lines, 10, 15);
    CHECK(s.valid.size() == 10);
    CHECK(s.test.size() == 15);
    CHECK(s.train.size() == 75);
    CHECK(s.valid.front() == lines.front());
    CHECK(s.test.back() == lines.back());
    CHECK(s.train.front() == lines[10]);
    CHECK(s.train.back() == lines[84]);
    CHECK_THROWS_AS(split_lines(lines, 60, 41), InsufficientData);
    CHECK(split_lines(lines, 60, 40).train.empty());
}

TEST_CASE("pipeline produces exact counts without duplicates") {
    TempDir dir;
    write_lines(dir / "a", numbered(300, 200));
    write_lines(dir / "b", numbered(150, 0));
    const auto report = run_pipeline({dir / "a", dir / "b"}, (dir / "data").string(), 3, 20, 30, true);
    CHECK(report.raw == 450);
    CHECK(report.duplicates == 250);
    CHECK(report.valid == 20);
    CHECK(report.test == 30);
    CHECK(report.train == 150);
    CHECK(read_lines(dir / "data.raw").size() == 450);
    CHECK(read_lines(dir / "data.shuf").size() == 200);
    std::set<std::string> all;
    std::size_t total = 0;
    for (const char* ext : {".valid", ".test", ".train"}) {
        const auto part = read_lines(dir / (std::string("data") + ext));
        total += part.size();
        all.insert(part.begin(), part.end());
    }
    CHECK(total == 200);
    CHECK(all.size() == 200);
    CHECK_THROWS_AS(read_lines(dir / "nothing"), FileError);
}
