#include "test_util.hpp"

#include "pathrwkv/runconfig.hpp"

using namespace prwk;

TEST_CASE("run config defaults mirror the training setup", "[runconfig]") {
    RunConfig c;
    CHECK(c.epochs == 100);
    CHECK(c.warmup_epochs == 20);
    CHECK(c.base_lr == 1e-4);
    CHECK(c.batch_size == 4);
    CHECK(c.max_n_tiles == 2000);
    CHECK(c.lr_floor == 0.01);
    auto tasks = parse_task_specs(c.tasks);
    REQUIRE(tasks.size() == 4);
    CHECK(tasks[0].name == "witness");
    CHECK(tasks[0].num_classes == 2);
    CHECK(tasks[2].kind == TaskKind::regression);
}

TEST_CASE("unknown keys are rejected", "[runconfig]") {
    nlohmann::json j = {{"epochs", 5}, {"no_such_key", 1}};
    CHECK_THROWS_AS(parse_run_config(j), ConfigError);
    nlohmann::json bad_type = {{"epochs", "ten"}};
    CHECK_THROWS_AS(parse_run_config(bad_type), ConfigError);
}

TEST_CASE("config hash is stable under key reordering", "[runconfig]") {
    auto a = parse_run_config(nlohmann::json{{"epochs", 7}, {"seed", 3}});
    auto b = parse_run_config(nlohmann::json{{"seed", 3}, {"epochs", 7}});
    CHECK(config_hash(a) == config_hash(b));
    auto c = parse_run_config(nlohmann::json{{"seed", 4}, {"epochs", 7}});
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("canonical form round-trips", "[runconfig]") {
    RunConfig c;
    c.epochs = 12;
    c.sampling = "z_order";
    c.witness_rate = 0.125;
    auto j = canonical_json(c);
    auto back = parse_run_config(j);
    CHECK(back.epochs == 12);
    CHECK(back.sampling == "z_order");
    CHECK(back.witness_rate == 0.125);
    CHECK(config_hash(back) == config_hash(c));
    // canonical form contains every key
    CHECK(j.size() >= 40);
}

TEST_CASE("task spec parser rejects malformed entries", "[runconfig]") {
    CHECK_THROWS_AS(parse_task_specs("nameonly"), ConfigError);
    CHECK_THROWS_AS(parse_task_specs("t:cls1"), ConfigError);
    CHECK_THROWS_AS(parse_task_specs("t:banana"), ConfigError);
    CHECK_THROWS_AS(parse_task_specs(""), ConfigError);
    auto ok = parse_task_specs("a:cls3,b:reg");
    CHECK(ok.size() == 2);
    CHECK(task_specs_to_string(ok) == "a:cls3,b:reg");
}
