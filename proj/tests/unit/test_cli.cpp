/*
   Copyright 2024 The fishnet authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "fishnet/batching.hpp"
#include "fishnet/pipeline.hpp"
#include "fishnet/raster.hpp"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures = FISHNET_FIXTURE_DIR;

struct scratch_dir {
    fs::path path;
    explicit scratch_dir(const std::string& tag) {
        path = fs::temp_directory_path() / ("fishnet_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~scratch_dir() { fs::remove_all(path); }
};

json fixture(const std::string& name) {
    std::ifstream in(fixtures / name);
    return json::parse(in);
}

fs::path write_config(const fs::path& dir, json doc, const std::string& name = "config.json") {
    auto path = dir / name;
    std::ofstream(path) << doc.dump(1);
    return path;
}

int run(const std::string& args) {
    std::string cmd = std::string(FISHNET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json tiny_region() {
    // two tiles of 400 m on a side at this latitude, with a little slack
    return json::parse(R"({
        "region": {"bbox": {"min_lat": 33.0, "min_lon": -97.0, "max_lat": 33.0071, "max_lon": -96.9915}},
        "years": [2016, 2017, 2018, 2019, 2020]
    })");
}

}  // namespace

TEST_CASE("command line errors exit with 1") {
    scratch_dir dir("flags");
    auto cfg = write_config(dir.path, tiny_region());
    CHECK(run("") == 1);
    CHECK(run("bogus --config " + cfg.string()) == 1);
    CHECK(run("fishnet") == 1);
    CHECK(run("fishnet --config " + cfg.string() + " --seed minus") == 1);
    CHECK(run("fishnet --config " + cfg.string() + " --colour red") == 1);
    CHECK(run("--help") == 0);
}

TEST_CASE("exit codes follow the error kind") {
    scratch_dir dir("codes");
    CHECK(run("fishnet --config " + (dir.path / "absent.json").string()) == 3);

    auto doc = tiny_region();
    doc["colour"] = "red";
    CHECK(run("fishnet --config " + write_config(dir.path, doc, "unknown.json").string()) == 1);

    doc = tiny_region();
    doc["years"] = {2016, 2018};
    CHECK(run("plan --config " + write_config(dir.path, doc, "gap.json").string()) == 1);

    // correcting before any rasters exist
    auto cfg = write_config(dir.path, tiny_region());
    CHECK(run("correct --config " + cfg.string()) == 2);
    CHECK(run("metrics --config " + cfg.string()) != 0);

    {
        fs::create_directories(dir.path / "out");
        fishnet::pipeline::output_lock held(dir.path / "out");
        CHECK(run("fishnet --config " + cfg.string()) == 3);
    }
    CHECK(run("fishnet --config " + cfg.string()) == 0);
}

TEST_CASE("fishnet writes the grid") {
    scratch_dir dir("grid");
    auto cfg = write_config(dir.path, tiny_region());
    REQUIRE(run("fishnet --config " + cfg.string()) == 0);
    auto grid = json::parse(slurp(dir.path / "out" / "grid.json"));
    CHECK(grid["num_tiles_x"] == 2);
    CHECK(grid["num_tiles_y"] == 2);

    REQUIRE(run("plan --config " + cfg.string()) == 0);
    auto manifest = json::parse(slurp(dir.path / "out" / "manifest.json"));
    CHECK(manifest["batches"].size() == 1);
}

TEST_CASE("full pipeline on a small region") {
    scratch_dir dir("full");
    auto cfg = write_config(dir.path, fixture("small_config.json"));
    for (auto name : fishnet::pipeline::command_names()) {
        CAPTURE(name);
        REQUIRE(run(std::string(name) + " --config " + cfg.string()) == 0);
    }
    fishnet::pipeline::artifact_paths out{dir.path / "out"};
    for (const auto& p : {out.grid(), out.manifest(), out.composite_report(), out.table(), out.sequences(),
                          out.model(), out.baseline(), out.predictions(), out.eval(), out.eval_baseline()}) {
        CAPTURE(p);
        CHECK(fs::is_regular_file(p));
    }
    CHECK(!fs::is_empty(out.corrected_dir()));

    std::istringstream eval(slurp(out.eval()));
    std::string line;
    std::getline(eval, line);
    std::map<std::string, int> per_branch;
    while (std::getline(eval, line)) {
        if (line.empty()) continue;
        auto a = line.find(',');
        auto b = line.find(',', a + 1);
        ++per_branch[line.substr(a + 1, b - a - 1)];
    }
    CHECK(per_branch["all"] == 3);
    CHECK(per_branch["active"] == 3);
    CHECK(per_branch["static"] == 3);

    // rerunning with the same seed reproduces every artifact
    auto first_model = slurp(out.model());
    auto first_eval = slurp(out.eval());
    auto first_predictions = slurp(out.predictions());
    auto first_table = slurp(out.table());
    for (auto name : fishnet::pipeline::command_names())
        REQUIRE(run(std::string(name) + " --config " + cfg.string()) == 0);
    CHECK(slurp(out.model()) == first_model);
    CHECK(slurp(out.eval()) == first_eval);
    CHECK(slurp(out.predictions()) == first_predictions);

    // a different seed changes the synthetic inputs
    REQUIRE(run("synth --config " + cfg.string() + " --seed 11") == 0);
    REQUIRE(run("correct --config " + cfg.string() + " --seed 11") == 0);
    REQUIRE(run("metrics --config " + cfg.string() + " --seed 11") == 0);
    CHECK(slurp(out.table()) != first_table);
}

TEST_CASE("synth stands in for the exporter") {
    scratch_dir dir("exporter");
    auto cfg = write_config(dir.path, tiny_region());
    REQUIRE(run("plan --config " + cfg.string()) == 0);
    REQUIRE(run("synth --config " + cfg.string()) == 0);

    const auto raw = dir.path / "out" / "raw";
    auto manifest = fishnet::batching::read_manifest(dir.path / "out" / "manifest.json");
    auto status = fishnet::batching::read_export_status_csv(raw / fishnet::pipeline::export_status_name);
    CHECK(static_cast<std::int64_t>(status.size()) ==
          manifest.plan.num_batches() * static_cast<std::int64_t>(manifest.years.size()));
    for (const auto& task : status) CHECK(task.status == fishnet::batching::export_state::done);

    // batch_<id>_<year>_<window>.lras, each with its sidecar
    const std::regex name(R"(batch_(\d+)_(\d{4})_(\d{4})-\d{2}-\d{2}\.lras)");
    int rasters = 0;
    for (const auto& entry : fs::directory_iterator(raw)) {
        if (entry.path().extension() != ".lras") continue;
        ++rasters;
        std::smatch m;
        const auto file = entry.path().filename().string();
        REQUIRE(std::regex_match(file, m, name));
        auto meta = fishnet::read_meta(entry.path());
        CHECK(meta.batch_id == std::stoll(m[1]));
        CHECK(meta.year == std::stoi(m[2]));
        CHECK(m[2] == m[3]);
        CHECK(fs::exists(fishnet::meta_path_for(entry.path())));
    }
    CHECK(rasters == 5 * 12);

    // a failed export blocks correction until it is redone
    status[2].status = fishnet::batching::export_state::failed;
    status[2].reason = "quota exceeded";
    fishnet::batching::write_export_status_csv(status, raw / fishnet::pipeline::export_status_name);
    CHECK(run("correct --config " + cfg.string()) == 2);
    status[2].status = fishnet::batching::export_state::done;
    status[2].reason.clear();
    fishnet::batching::write_export_status_csv(status, raw / fishnet::pipeline::export_status_name);
    CHECK(run("correct --config " + cfg.string()) == 0);
}
