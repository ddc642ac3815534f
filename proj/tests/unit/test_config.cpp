#include <cstdlib>
#include <filesystem>

#include "batdeg/config/config.hpp"
#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"
#include "doctest.h"

using namespace batdeg;
using namespace batdeg::config;

TEST_CASE("config defaults validate and round-trip through text") {
    const RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.fleet.life.record_every == 5);
    CHECK(cfg.fleet.life.detail_cycles == 50);
    const auto text = cfg.to_text();
    const auto back = parse_config(text);
    CHECK(back.to_text() == text);
}

TEST_CASE("config parses every value kind") {
    const auto cfg = parse_config(R"(# run
[protocol]
n_states = 4   # fewer states
cap_w = 12.5

[fleet]
cells = 10
temperatures = [-5, 25.5]
knee_fraction = 0.5

[tasks]
knee_mode = "max_slope"
tie_break = "lowest_index"
n_trees = 50

[paths]
data = "out/#data"
)");
    CHECK(cfg.protocol.n_states == 4);
    CHECK(cfg.protocol.cap_w == 12.5);
    CHECK(cfg.fleet.cells == 10);
    REQUIRE(cfg.fleet.temperatures.size() == 2);
    CHECK(cfg.fleet.temperatures[0] == -5.0);
    CHECK(cfg.fleet.temperatures[1] == 25.5);
    CHECK(cfg.tasks.n_trees == 50);
    CHECK(cfg.paths.data == "out/#data");
    CHECK(cfg.knee_labels().mode == pipeline::KneeMode::max_slope);
    CHECK(cfg.task_config().forest.tie_break == forest::TieBreak::lowest_index);
    CHECK(cfg.task_config().forest.n_trees == 50);
    const auto round = parse_config(cfg.to_text());
    CHECK(round.to_text() == cfg.to_text());
}

TEST_CASE("config errors name the source and line") {
    auto message = [](const std::string& text) {
        try {
            (void)parse_config(text, "run.toml");
        } catch (const ValidationError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message("[fleet]\ncells = 3\nbogus = 1\n").find("run.toml:3") != std::string::npos);
    CHECK(message("[fleet]\nbogus = 1\n").find("unknown key 'bogus'") != std::string::npos);
    CHECK(message("[nope]\n").find("unknown section") != std::string::npos);
    CHECK(message("cells = 3\n").find("outside a section") != std::string::npos);
    CHECK(message("[fleet]\ncells = -3\n").find("run.toml:2") != std::string::npos);
    CHECK(message("[fleet]\ncells = 2.5\n").find("integer") != std::string::npos);
    CHECK(message("[fleet]\ncells = 3\ncells = 4\n").find("duplicate") != std::string::npos);
    CHECK(message("[tasks]\nknee_mode = max_slope\n").find("run.toml:2") != std::string::npos);
    CHECK(message("[paths]\ndata = \"open\n").find("string") != std::string::npos);
    CHECK(message("[fleet]\ntemperatures = [1, x]\n").find("run.toml:2") != std::string::npos);
}

TEST_CASE("config validation rejects out-of-range values") {
    CHECK_THROWS_AS(parse_config("[fleet]\ncells = 0\n").validate(), ValidationError);
    CHECK_THROWS_AS(parse_config("[tasks]\ntrain_fraction = 1.5\n").validate(), ValidationError);
    CHECK_THROWS_AS(parse_config("[tasks]\ntie_break = \"random\"\n").validate(), ValidationError);
    CHECK_THROWS_AS(parse_config("[protocol]\nstep_s = 0\n").validate(), ValidationError);
    CHECK_THROWS_AS(parse_config("[features]\ngroups = 0\n").validate(), ValidationError);
}

TEST_CASE("environment overrides apply to paths only") {
    const auto dir = std::filesystem::temp_directory_path() / "batdeg_config_env";
    std::filesystem::create_directories(dir);
    const auto file = dir / "run.toml";
    io::write_file_atomic(file, "[paths]\nmodels = \"from/file\"\n[fleet]\ncells = 12\n");
    ::setenv("BATDEG_PATHS_MODELS", "from/env", 1);
    ::setenv("BATDEG_FLEET_CELLS", "99", 1);
    const auto cfg = load_config(file);
    ::unsetenv("BATDEG_PATHS_MODELS");
    ::unsetenv("BATDEG_FLEET_CELLS");
    CHECK(cfg.paths.models == "from/env");
    CHECK(cfg.fleet.cells == 12);
    CHECK_THROWS_AS(load_config(dir / "missing.toml"), ValidationError);
}

TEST_CASE("fleet_config carries the protocol generation options") {
    const auto cfg = parse_config("[protocol]\ncap_w = 9\nduration_s = 3600\nstep_s = 60\n");
    const auto f = cfg.fleet_config();
    CHECK(f.protocol.cap_w == 9.0);
    CHECK(f.protocol.duration_s == 3600.0);
    CHECK(f.protocol.step_s == 60.0);
}
