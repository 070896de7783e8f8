#include <doctest.h>

#include "fedma/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

using namespace fedma;

TEST_CASE("config json round trip is canonical") {
    SimConfig cfg;
    cfg.population = 50;
    cfg.sample_count = 12;
    cfg.cohort = 6;
    cfg.horizon = 33;
    cfg.server_lr = 0.7;
    cfg.local_lr = 0.05;
    cfg.local_steps = 2;
    cfg.beta = 0.85;
    cfg.server_opt = ServerOptKind::FedAdam;
    cfg.downscale_p = 1.5;
    cfg.tau_max = 7;
    cfg.delay = DelayDistribution::uniform(9);
    cfg.method = Method::MaLight;
    cfg.dp = DpConfig::calibrated(0.5, 2.0, 0.2);
    cfg.seed = 99;
    cfg.task.kind = "quadratic";
    cfg.task.dim = 4;
    cfg.task.num_clients = 50;

    auto j = config_to_json(cfg);
    auto back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(back.delay.kind == DelayKind::Uniform);
    CHECK(back.delay.uniform_cutoff == 9);
    CHECK(back.method == Method::MaLight);
    CHECK(back.server_opt == ServerOptKind::FedAdam);
    REQUIRE(back.dp.has_value());
    CHECK(back.dp->gamma == doctest::Approx(cfg.dp->gamma));
    CHECK(back.dp->sensitivity == doctest::Approx(cfg.dp->sensitivity));
}

TEST_CASE("parsing validates") {
    nlohmann::json j = config_to_json(SimConfig{});
    j["cohort"] = 1000;  // cohort > sample_count
    CHECK_THROWS_AS(config_from_json(j), contract_error);
    j = config_to_json(SimConfig{});
    j["method"] = "bogus";
    CHECK_THROWS_AS(config_from_json(j), contract_error);
}

TEST_CASE("set_json_path handles nested keys") {
    nlohmann::json doc = config_to_json(SimConfig{});
    set_json_path(doc, "delay.scale", 2.5);
    set_json_path(doc, "task.dim", 3);
    set_json_path(doc, "beta", 0.1);
    auto cfg = config_from_json(doc);
    CHECK(cfg.delay.scale == doctest::Approx(2.5));
    CHECK(cfg.task.dim == 3);
    CHECK(cfg.beta == doctest::Approx(0.1));
}

TEST_CASE("sweep expansion is the cartesian product times seeds") {
    SweepSpec spec;
    spec.base = config_to_json(SimConfig{});
    spec.axes.push_back({"beta", {0.0, 0.5, 0.9}});
    spec.axes.push_back({"server_lr", {0.1, 0.2}});
    spec.seeds = {1, 2};
    CHECK(spec.point_count() == 12);
    auto points = expand_sweep(spec);
    REQUIRE(points.size() == 12);
    // every (assignment, seed) combination appears exactly once
    std::set<std::string> hashes;
    for (const auto& p : points) {
        CHECK(p.assignment.size() == 2);
        hashes.insert(p.content_hash + ":" + std::to_string(p.seed));
    }
    CHECK(hashes.size() == 12);
    // seeds land in the configs
    CHECK(points[0].seed == 1);
    CHECK(points[0].config.seed == 1);
    CHECK(points[1].seed == 2);
}

TEST_CASE("sweep with no axes still runs each seed") {
    SweepSpec spec;
    spec.base = config_to_json(SimConfig{});
    spec.seeds = {7, 8, 9};
    auto points = expand_sweep(spec);
    REQUIRE(points.size() == 3);
    CHECK(points[2].config.seed == 9);
}

TEST_CASE("content hash depends on the config, not the spec layout") {
    SweepSpec a, b;
    a.base = config_to_json(SimConfig{});
    b.base = a.base;
    b.base["extra_comment_like_field"] = nullptr;  // ignored by the parser
    a.seeds = b.seeds = {4};
    auto pa = expand_sweep(a), pb = expand_sweep(b);
    CHECK(pa[0].content_hash == pb[0].content_hash);
}

TEST_CASE("seed env override") {
    SimConfig cfg;
    cfg.seed = 3;
    setenv("FEDMA_SEED", "42", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.seed == 42);
    unsetenv("FEDMA_SEED");
    apply_env_overrides(cfg);
    CHECK(cfg.seed == 42);  // unset leaves the config value alone
}

TEST_CASE("load_config reads a file and rejects missing paths") {
    const std::string path = "/tmp/fedma_test_config.json";
    {
        std::ofstream out(path);
        out << config_to_json(SimConfig{}).dump(2);
    }
    auto cfg = load_config(path);
    CHECK(cfg.horizon == SimConfig{}.horizon);
    CHECK_THROWS_AS(load_config("/tmp/does_not_exist_fedma.json"), contract_error);
}
