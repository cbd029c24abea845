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

// Acceptance checks for the whole pipeline. Prints one PASS/FAIL line per
// criterion and exits with 1 if any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Core>

#include "fishnet/batching.hpp"
#include "fishnet/composite.hpp"
#include "fishnet/config.hpp"
#include "fishnet/forecast.hpp"
#include "fishnet/gbt.hpp"
#include "fishnet/geo.hpp"
#include "fishnet/loss.hpp"
#include "fishnet/metrics.hpp"
#include "fishnet/pipeline.hpp"
#include "fishnet/synth.hpp"
#include "support/oracles.hpp"

using namespace fishnet;
namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const fs::path fixtures = FISHNET_FIXTURE_DIR;
constexpr double r_earth = 6371000.0;

struct outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

long peak_rss_kb() {
    rusage u{};
    getrusage(RUSAGE_SELF, &u);
    return u.ru_maxrss;
}

// bbox whose widest parallel spans ew_m and whose meridian spans ns_m
geo::geo_bbox box_of_size(double min_lat, double min_lon, double ns_m, double ew_m) {
    const double rad = M_PI / 180.0;
    const double max_lat = min_lat + ns_m / (r_earth * rad);
    const double widest = std::clamp(0.0, min_lat, max_lat);
    return {min_lat, min_lon, max_lat, min_lon + ew_m / (r_earth * std::cos(widest * rad) * rad)};
}

geo::geo_bbox statewide_box() { return box_of_size(25.84, -106.6, 1'250'000.0, 1'300'000.0); }

outcome fishnet_scale() {
    const long rss0 = peak_rss_kb();
    const auto t0 = std::chrono::steady_clock::now();
    auto grid = geo::generate_fishnet(statewide_box(), 400.0);
    // touch tiles across the grid so that lazily derived geometry is exercised as well
    double checksum = 0.0;
    for (std::int64_t id = 0; id < grid.num_tiles(); id += 9973) checksum += grid.tile(id).bbox.min_lat;
    checksum += grid.tile(grid.num_tiles() - 1).bbox.max_lon;
    const double elapsed = seconds_since(t0);
    const long grown_kb = peak_rss_kb() - rss0;
    const auto n = grid.num_tiles();
    outcome o;
    o.pass = n >= 9'500'000 && n <= 10'500'000 && elapsed < 1.0 && grown_kb < 4096 && std::isfinite(checksum);
    o.detail = std::to_string(grid.num_tiles_x()) + " x " + std::to_string(grid.num_tiles_y()) + " = " +
               std::to_string(n) + " tiles in " + fmt(elapsed * 1e3) + " ms, peak RSS grew " +
               std::to_string(grown_kb) + " kB, grid object " + std::to_string(sizeof(grid)) + " bytes";
    return o;
}

outcome batch_scale() {
    auto plan = batching::plan_batches(geo::generate_fishnet(statewide_box(), 400.0), 64000.0);
    const auto n = plan.num_batches();
    return {n >= 380 && n <= 440, std::to_string(plan.num_batches_x()) + " x " + std::to_string(plan.num_batches_y()) +
                                      " = " + std::to_string(n) + " batches of " + std::to_string(plan.tile_px()) +
                                      " px tiles"};
}

outcome haversine_oracle() {
    std::mt19937_64 gen(1000);
    std::uniform_real_distribution<double> lat(-90.0, 90.0), lon(-180.0, 180.0), near(-0.05, 0.05);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        geo::geo_point a{lat(gen), lon(gen)};
        geo::geo_point b = k % 4 == 0 ? geo::geo_point{std::clamp(a.lat + near(gen), -90.0, 90.0), a.lon + near(gen)}
                                      : geo::geo_point{lat(gen), lon(gen)};
        const auto want = oracle::haversine(a.lat, a.lon, b.lat, b.lon, r_earth);
        const double got = geo::haversine_distance(a, b);
        const double err = want == 0 ? std::abs(got) : static_cast<double>(abs((oracle::wide(got) - want) / want));
        worst = std::max(worst, err);
    }
    return {worst < 1e-12, "1000 pairs, worst relative error " + fmt(worst, 3)};
}

outcome reassembly() {
    // one full 64 km batch of 160 x 160 tiles at 10 m
    auto grid = geo::generate_fishnet(box_of_size(30.0, -98.0, 64000.0 - 100.0, 64000.0 - 100.0), 400.0);
    auto plan = batching::plan_batches(grid, 64000.0, 10.0);
    auto b = plan.batch(0);
    const auto w = plan.width_px(b), h = plan.height_px(b);

    scene_spec spec;
    spec.width = w;
    spec.height = h;
    spec.years = {2020};
    spec.seed = 6400;
    auto original = synth_truth(spec, 2020);
    original.set_transform(plan.batch_transform(b));
    std::mt19937_64 gen(6400);
    std::bernoulli_distribution flip(0.05);
    std::uniform_int_distribution<int> any(0, 8);
    for (auto& v : original.data())
        if (flip(gen)) v = static_cast<std::uint8_t>(any(gen));

    label_raster stitched(w, h, 1, original.transform());
    std::int64_t tiles = 0;
    for (auto j = b.j0; j <= b.j1; ++j)
        for (auto i = b.i0; i <= b.i1; ++i, ++tiles) {
            auto window = batching::tile_pixel_window(plan, b, grid.tile(i, j));
            paste(stitched, crop(original, window), window);
        }
    const bool same = stitched == original &&
                      std::memcmp(stitched.data().data(), original.data().data(), original.data().size()) == 0;
    return {same && w == 6400 && h == 6400, std::to_string(w) + " x " + std::to_string(h) + " px from " +
                                                std::to_string(tiles) + " tile windows, " +
                                                (same ? "byte-identical" : "differs")};
}

template <typename Scalar>
bool permutation_invariant(image_collection<Scalar> c, std::mt19937_64& gen, double& worst_mean_diff) {
    using composite::aggregation_op;
    std::vector<aggregation_op> ops;
    if constexpr (std::is_same_v<Scalar, float>)
        ops = {aggregation_op::mean, aggregation_op::median, aggregation_op::min, aggregation_op::max};
    else
        ops = {aggregation_op::median, aggregation_op::min, aggregation_op::max, aggregation_op::mode};
    std::vector<raster<Scalar>> want;
    for (auto op : ops) want.push_back(composite::aggregate(c, op));
    bool ok = true;
    for (int round = 0; round < 4; ++round) {
        std::shuffle(c.begin(), c.end(), gen);
        for (std::size_t k = 0; k < ops.size(); ++k) {
            auto got = composite::aggregate(c, ops[k]);
            if (ops[k] != aggregation_op::mean) {
                ok = ok && got == want[k];
                continue;
            }
            for (std::int64_t s = 0; s < got.data().size(); ++s) {
                const float a = got.data()[s], b = want[k].data()[s];
                if (std::isnan(a) || std::isnan(b)) {
                    ok = ok && std::isnan(a) && std::isnan(b);
                } else {
                    worst_mean_diff = std::max(worst_mean_diff, static_cast<double>(std::abs(a - b)));
                }
            }
        }
    }
    return ok && worst_mean_diff <= 1e-6;
}

template <typename Scalar>
bool valid_samples_kept(const raster<Scalar>& seasonal, const raster<Scalar>& corrected) {
    for (std::int64_t s = 0; s < seasonal.data().size(); ++s) {
        if (is_nodata(seasonal.data()[s])) continue;
        if (std::memcmp(&seasonal.data()[s], &corrected.data()[s], sizeof(Scalar)) != 0) return false;
    }
    return true;
}

std::int64_t count_snow(const label_raster& r) {
    return (r.data() == class_index(land_class::snow_and_ice)).count();
}

outcome corrector_suite() {
    using composite::aggregation_op;
    const auto summer = seasonal_window::summer();
    std::mt19937_64 gen(77);
    bool ok = true;
    std::int64_t missing_before = 0, missing_after = 0, snow_in_summer = 0, snow_in_winter = 0;
    std::int64_t snow_from_fallback = 0;
    double worst_mean_diff = 0.0;
    int scenes = 0;
    // with a single summer image the cloud gaps survive the seasonal composite and reach the fallback
    const std::vector<std::vector<int>> calendars = {{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, {1, 2, 7, 11, 12}};
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        for (bool probabilities : {false, true}) {
            scene_spec clear;
            clear.width = 160;
            clear.height = 120;
            clear.years = {2019};
            clear.seed = seed;
            clear.snow_months = true;
            clear.label_noise = 0.02;
            clear.probabilities = probabilities;
            clear.months = calendars[seed % 2];
            scene_spec cloudy = clear;
            cloudy.cloud_gap_fraction = 0.1;
            auto fallback_year = synth_year(clear, 2019);
            auto cloudy_year = synth_year(cloudy, 2019);
            ++scenes;

            if (!probabilities) {
                const auto& imgs = cloudy_year.labels;
                auto season_only = composite::filter_season(imgs, summer);
                auto seasonal = composite::aggregate(season_only, aggregation_op::mode);
                auto [corrected, report] = composite::correct_year(imgs, fallback_year.labels, aggregation_op::mode, summer);
                missing_before += report.missing_before;
                missing_after += report.missing_after;
                ok = ok && report.missing_after == 0 && count_missing_pixels(corrected) == 0;
                ok = ok && valid_samples_kept(seasonal, corrected);
                ok = ok && permutation_invariant(season_only, gen, worst_mean_diff);
                snow_in_summer += count_snow(seasonal);
                snow_from_fallback += count_snow(corrected) - count_snow(seasonal);
                for (const auto& item : imgs)
                    if (!seasonal_window::summer().contains(item.timestamp))
                        for (std::int64_t s = 0; s < item.image.data().size(); ++s)
                            snow_in_winter +=
                                item.image.data()[s] == static_cast<std::uint8_t>(land_class::snow_and_ice);
            } else {
                const auto& imgs = cloudy_year.probabilities;
                auto season_only = composite::filter_season(imgs, summer);
                for (auto op : {aggregation_op::mean, aggregation_op::median, aggregation_op::max}) {
                    auto seasonal = composite::aggregate(season_only, op);
                    auto [corrected, report] = composite::correct_year(imgs, fallback_year.probabilities, op, summer);
                    missing_before += report.missing_before;
                    missing_after += report.missing_after;
                    ok = ok && report.missing_after == 0 && count_missing_pixels(corrected) == 0;
                    ok = ok && valid_samples_kept(seasonal, corrected);
                    snow_in_summer += count_snow(argmax_label(seasonal));
                    snow_from_fallback += count_snow(argmax_label(corrected)) - count_snow(argmax_label(seasonal));
                }
                ok = ok && permutation_invariant(season_only, gen, worst_mean_diff);
            }
        }
    }
    ok = ok && snow_in_summer == 0 && snow_in_winter > 0 && missing_before > 0 && missing_after == 0;
    return {ok, std::to_string(scenes) + " scenes, " + std::to_string(missing_before) + " gaps before, " +
                    std::to_string(missing_after) + " after, summer snow " + std::to_string(snow_in_summer) +
                    " (winter " + std::to_string(snow_in_winter) + ", filled from the annual fallback " +
                    std::to_string(snow_from_fallback) + "), worst mean reorder diff " +
                    fmt(worst_mean_diff, 3)};
}

outcome metrics_oracle() {
    std::mt19937_64 gen(4040);
    std::uniform_real_distribution<double> share(0.0, 0.6);
    int mismatches = 0;
    double worst_sum_err = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto r = oracle::random_labels(40, 40, share(gen), gen);
        auto counts = oracle::count_classes(r);
        const std::int64_t valid = 1600 - counts[9];
        auto s = metrics::class_proportions(r);
        double sum = 0.0;
        for (int k = 0; k < num_classes; ++k) {
            const double want = valid == 0 ? 0.0 : static_cast<double>(counts[k]) / static_cast<double>(valid);
            mismatches += s.proportion[k] != want;
            sum += s.proportion[k];
        }
        mismatches += s.valid_fraction != static_cast<double>(valid) / 1600.0;
        if (valid > 0) worst_sum_err = std::max(worst_sum_err, std::abs(sum - 1.0));
    }
    return {mismatches == 0 && worst_sum_err <= 1e-9,
            "1000 rasters, " + std::to_string(mismatches) + " mismatches, worst |sum - 1| " + fmt(worst_sum_err, 3)};
}

outcome loss_identities() {
    using forecast::mse, forecast::r2, forecast::wmse;
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool ok = true;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial;
        VectorXd y(n), yh(n);
        for (int k = 0; k < n; ++k) y(k) = u(gen), yh(k) = u(gen);
        ok = ok && wmse(y, yh, VectorXd::Zero(n), 100.0) == mse(y, yh);
        ok = ok && r2(y, y) == 1.0;
    }
    VectorXd a(2), b(2), alpha(2);
    a << 1, 0;
    b << 0, 0;
    alpha << 1, 0;
    const double example = wmse(a, b, alpha, 100.0);
    ok = ok && example == 50.5;
    return {ok, "wmse([1,0],[0,0],[1,0],100) = " + fmt(example) + ", 200 random zero-alpha and perfect-fit cases"};
}

outcome gbt_sanity() {
    using forecast::gbt_params, forecast::gbt_train, forecast::loss_kind;
    std::mt19937_64 gen(99);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    MatrixXd X(400, 5);
    VectorXd y(400);
    for (int i = 0; i < 400; ++i) {
        for (int f = 0; f < 5; ++f) X(i, f) = n(gen);
        y(i) = std::sin(X(i, 0)) + X(i, 1) * X(i, 2) + 0.3 * n(gen);
    }
    gbt_params p;
    p.num_rounds = 100;
    p.max_depth = 3;
    p.min_samples_leaf = 5;
    auto reg = gbt_train(X, y, p);
    bool monotone = reg.loss_history.size() == 101;
    for (std::size_t k = 1; k < reg.loss_history.size(); ++k)
        monotone = monotone && reg.loss_history[k] <= reg.loss_history[k - 1];

    MatrixXd xs(300, 1);
    VectorXd step(300);
    for (int i = 0; i < 300; ++i) {
        xs(i, 0) = u(gen);
        step(i) = xs(i, 0) < 0.2 ? 0.0 : 1.0;
    }
    gbt_params stump = p;
    stump.max_depth = 1;
    stump.min_samples_leaf = 10;
    auto step_model = gbt_train(xs, step, stump);
    const double mae = (step_model.predict(xs) - step).cwiseAbs().mean();

    MatrixXd xc(400, 3);
    VectorXd cls(400);
    for (int i = 0; i < 400; ++i) {
        for (int f = 0; f < 3; ++f) xc(i, f) = n(gen);
        cls(i) = 0.8 * xc(i, 0) - 0.6 * xc(i, 1) + 0.2 * xc(i, 2) > 0.0 ? 1.0 : 0.0;
    }
    gbt_params logistic = p;
    logistic.num_rounds = 200;
    logistic.min_samples_leaf = 2;
    logistic.loss = loss_kind::logistic;
    auto clf = gbt_train(xc, cls, logistic);
    auto prob = clf.predict(xc);
    int correct = 0;
    for (int i = 0; i < 400; ++i) correct += (prob(i) >= 0.5) == (cls(i) == 1.0);
    const double accuracy = correct / 400.0;

    return {monotone && mae <= 0.05 && accuracy == 1.0,
            std::string("loss ") + (monotone ? "non-increasing" : "increases") + " over 100 rounds, step MAE " +
                fmt(mae, 3) + ", separable accuracy " + fmt(accuracy)};
}

// ---------------------------------------------------------------------------
// end-to-end runs through the command line tool

struct scratch_dir {
    fs::path path;
    explicit scratch_dir(const std::string& tag) {
        path = fs::temp_directory_path() / ("fishnet_acceptance_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~scratch_dir() { fs::remove_all(path); }
};

fs::path stage_config(const fs::path& dir) {
    fs::copy_file(fixtures / "e2e_config.json", dir / "config.json", fs::copy_options::overwrite_existing);
    return dir / "config.json";
}

void run_pipeline(const fs::path& config) {
    for (auto name : pipeline::command_names()) {
        std::string cmd = std::string(FISHNET_CLI_PATH) + " " + std::string(name) + " --config " + config.string() +
                          " > /dev/null 2> " + (config.parent_path() / "stderr.txt").string();
        int status = std::system(cmd.c_str());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
            throw std::runtime_error("fishnet " + std::string(name) + " failed, see " +
                                     (config.parent_path() / "stderr.txt").string());
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

outcome end_to_end(const fs::path& config) {
    const auto t0 = std::chrono::steady_clock::now();
    run_pipeline(config);
    const double elapsed = seconds_since(t0);

    auto c = pipeline::load_config(config);
    pipeline::artifact_paths out{c.output_dir};
    const auto tiles = pipeline::make_grid(c).num_tiles();
    auto table = metrics::read_table_csv(out.table());
    auto labels = forecast::label_activity(table, c.years, c.tau);
    const auto active = std::count_if(labels.begin(), labels.end(), [](const auto& l) {
        return l.second == forecast::activity_label::active;
    });
    const double active_fraction = static_cast<double>(active) / static_cast<double>(labels.size());

    auto model = forecast::read_eval_csv(out.eval());
    auto baseline = forecast::read_eval_csv(out.eval_baseline());
    auto find = [](const std::vector<forecast::eval_row>& rows, int h) -> const forecast::eval_row* {
        for (const auto& r : rows)
            if (r.horizon == h && r.branch == "all") return &r;
        return nullptr;
    };

    bool ok = tiles >= 1000 && c.years.size() == 7 && active_fraction >= 0.03 && active_fraction <= 0.08 &&
              elapsed < 300.0;
    std::string detail = std::to_string(tiles) + " tiles, " + std::to_string(c.years.size()) + " years, " +
                         fmt(100.0 * active_fraction, 3) + "% active;";
    for (int h : {1, 2, 3}) {
        const auto* m = find(model, h);
        const auto* b = find(baseline, h);
        if (!m || !b) {
            ok = false;
            detail += " h" + std::to_string(h) + " missing;";
            continue;
        }
        ok = ok && m->wmse < b->wmse && m->r2 >= 0.9;
        detail += " h" + std::to_string(h) + " wmse " + fmt(m->wmse, 3) + " vs " + fmt(b->wmse, 3) + " r2 " +
                  fmt(m->r2, 4) + ";";
    }
    detail += " " + fmt(elapsed, 3) + " s";
    return {ok, detail};
}

outcome determinism(const fs::path& first_root, const fs::path& config) {
    run_pipeline(config);
    const auto second_root = pipeline::load_config(config).output_dir;
    int compared = 0, differing = 0;
    std::string first_diff;
    for (const auto& entry : fs::recursive_directory_iterator(first_root)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext != ".csv" && ext != ".json") continue;
        const auto rel = fs::relative(entry.path(), first_root);
        ++compared;
        if (!fs::exists(second_root / rel) || slurp(entry.path()) != slurp(second_root / rel)) {
            if (differing++ == 0) first_diff = rel.string();
        }
    }
    return {compared > 0 && differing == 0,
            std::to_string(compared) + " CSV/JSON artifacts compared, " + std::to_string(differing) + " differ" +
                (first_diff.empty() ? "" : " (first: " + first_diff + ")")};
}

bool report(const std::string& name, const std::function<outcome()>& check) {
    outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    return o.pass;
}

}  // namespace

int main() {
    bool all = true;
    all &= report("fishnet scale", fishnet_scale);
    all &= report("batch scale", batch_scale);
    all &= report("haversine oracle", haversine_oracle);
    all &= report("reassembly", reassembly);
    all &= report("corrector suite", corrector_suite);
    all &= report("metrics oracle", metrics_oracle);
    all &= report("loss identities", loss_identities);
    all &= report("gbt sanity", gbt_sanity);

    scratch_dir first("first"), second("second");
    const auto first_config = stage_config(first.path);
    all &= report("end-to-end forecasting", [&] { return end_to_end(first_config); });
    all &= report("determinism", [&] { return determinism(first.path / "out", stage_config(second.path)); });

    std::cout << (all ? "all criteria passed" : "some criteria failed") << std::endl;
    return all ? 0 : 1;
}
