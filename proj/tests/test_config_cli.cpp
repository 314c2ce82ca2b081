#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "int2int/config.hpp"
#include "int2int/errors.hpp"
#include "support/temp_dir.hpp"

using namespace int2int;
using int2int::testing::TempDir;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "int2int");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

nlohmann::json read_params(const std::filesystem::path& dir) {
    std::ifstream in(dir / "params.txt");
    return nlohmann::json::parse(in);
}

std::vector<std::string> tiny_run(const TempDir& dir, const std::string& id) {
    return {"train",        "--dump_path",   dir.path().string(), "--exp_name",    "t",   "--exp_id",
            id,             "--base",        "10",                "--max_int",     "50",  "--n_enc_layers",
            "1",            "--n_dec_layers", "1",                "--enc_emb_dim", "16",  "--dec_emb_dim",
            "16",           "--n_enc_heads", "2",                 "--n_dec_heads", "2",   "--epoch_size",
            "64",           "--batch_size",  "16",                "--eval_size",   "32",  "--max_epoch",
            "1",            "--env_base_seed", "3", "--max_output_len", "8"};
}

}  // namespace

TEST_CASE("default configuration validates and maps to components") {
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.epoch_size == 300000);
    CHECK(c.batch_size == 32);
    CHECK(c.modulo == 67);
    CHECK(c.base == 1000);
    CHECK(c.eval_size == 10000);
    CHECK(c.batch_size_eval == 128);
    CHECK(c.report_loss_every == 200);
    CHECK(c.max_epoch == 100000);
    CHECK(c.optimizer_config().lr == 1e-4);
    CHECK(c.task_spec().operation == Operation::gcd);
    CHECK(c.model_config().n_enc_layers == 4);
    CHECK(c.reduction_chunk() == 0);
    c.deterministic = true;
    c.env_base_seed = 0;
    CHECK(c.reduction_chunk() == kDeterministicChunk);
}

TEST_CASE("invalid configurations are rejected") {
    auto bad = [](auto mutate) {
        RunConfig c;
        mutate(c);
        return c;
    };
    CHECK_THROWS_AS(bad([](RunConfig& c) { c.enc_emb_dim = 250; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& c) { c.operation = "frobnicate"; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& c) { c.operation = "data"; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& c) { c.batch_size = 0; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& c) { c.optimizer = "frobnicate,lr=1"; }).validate(), ParseError);
    CHECK_THROWS_AS(bad([](RunConfig& c) {
                        c.deterministic = true;
                        c.env_base_seed = -1;
                    }).validate(),
                    ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& c) {
                        c.architecture = "encoder_only";
                        c.operation = "fraction_add";
                    }).validate(),
                    ConfigError);
}

TEST_CASE("configuration JSON round trip") {
    RunConfig c;
    c.max_int = 77;
    c.beam_search = true;
    c.first_class_prob = 0.25;
    nlohmann::json j = c;
    CHECK(j.get<RunConfig>() == c);
    j["no_such_flag"] = 1;
    CHECK_THROWS_AS(j.get<RunConfig>(), ConfigError);
}

TEST_CASE("unknown flags and bad values exit with code 1") {
    CHECK(run_cli({"train", "--no_such_flag", "3"}).code == cli::kExitConfig);
    CHECK(run_cli({"train", "--batch_size", "many"}).code == cli::kExitConfig);
    CHECK(run_cli({"train", "--enc_emb_dim", "250"}).code == cli::kExitConfig);
    CHECK(run_cli({"frobnicate"}).code == cli::kExitConfig);
}

TEST_CASE("flags, aliases and boolean spellings reach the run configuration") {
    TempDir dir;
    auto args = tiny_run(dir, "a");
    for (const std::string flag : {"--max_epoch", "--max_int", "--min_int", "--modulo", "--n_enc_hidden_layers"}) {
        const auto it = std::find(args.begin(), args.end(), flag);
        if (it != args.end()) args.erase(it, it + 2);
    }
    args.insert(args.end(), {"--maxint", "40", "--minint", "2", "--modulus", "13", "--max_epochs", "1",
                             "--n_enc_hidden_layer", "2", "--share_inout_emb", "false", "--xav_init",
                             "--cpu", "true"});
    const auto r = run_cli(args);
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.err.find("--cpu") != std::string::npos);
    const auto p = read_params(dir / "t" / "a");
    CHECK(p["max_int"] == 40);
    CHECK(p["min_int"] == 2);
    CHECK(p["modulo"] == 13);
    CHECK(p["n_enc_hidden_layers"] == 2);
    CHECK(p["share_inout_emb"] == false);
    CHECK(p["xav_init"] == true);
    CHECK(std::filesystem::exists(dir / "t" / "a" / "train.log"));
    CHECK(std::filesystem::exists(dir / "t" / "a" / "checkpoint"));
}

TEST_CASE("a random experiment id is created when none is given") {
    TempDir dir;
    auto args = tiny_run(dir, "x");
    args.erase(args.begin() + 5, args.begin() + 7);
    REQUIRE(run_cli(args).code == 0);
    std::vector<std::string> ids;
    for (const auto& e : std::filesystem::directory_iterator(dir / "t")) ids.push_back(e.path().filename().string());
    REQUIRE(ids.size() == 1);
    CHECK(ids[0].size() == 10);
}
