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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include <unistd.h>

#include "fishnet/error.hpp"
#include "fishnet/raster.hpp"
#include "json.hpp"
#include "fishnet/synth.hpp"
#include "support/oracles.hpp"

using namespace fishnet;
namespace fs = std::filesystem;

namespace {

struct scratch {
    fs::path dir;
    scratch() {
        dir = fs::temp_directory_path() / ("fishnet_raster_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~scratch() { fs::remove_all(dir); }
    fs::path operator/(const std::string& name) const { return dir / name; }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spill(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

prob_raster random_probs(std::int64_t w, std::int64_t h, std::mt19937_64& gen) {
    prob_raster r(w, h, num_classes);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::bernoulli_distribution gap(0.1);
    for (std::int64_t k = 0; k < r.pixels(); ++k) {
        bool missing = gap(gen);
        for (int b = 0; b < num_classes; ++b) r.data()[b * r.pixels() + k] = missing ? r.nodata() : u(gen);
    }
    return r;
}

// linear scan, first maximum wins
std::uint8_t argmax_oracle(const prob_raster& p, std::int64_t k) {
    int best = -1;
    float value = 0.0f;
    for (int b = 0; b < num_classes; ++b) {
        float v = p.data()[b * p.pixels() + k];
        if (std::isnan(v)) continue;
        if (best < 0 || v > value) {
            best = b;
            value = v;
        }
    }
    return best < 0 ? 255 : static_cast<std::uint8_t>(best);
}

std::int64_t count_built(const label_raster& r) {
    return (r.data() == class_index(land_class::built)).cast<std::int64_t>().sum();
}

}  // namespace

TEST_CASE("class indices") {
    CHECK(class_index(land_class::built) == 6);
    for (int k = 0; k < num_classes; ++k) CHECK(class_from_name(class_name(k)) == k);
    CHECK(class_name(8) == "snow_and_ice");
    CHECK_THROWS_AS(class_from_name("urban"), invalid_argument);
    CHECK_THROWS_AS(class_name(9), invalid_argument);
}

TEST_CASE("raster construction") {
    label_raster r(3, 2, 1);
    CHECK(r.data().size() == 6);
    CHECK((r.data() == 255).all());
    CHECK(std::isnan(prob_raster(1, 1, 9).at(8, 0, 0)));
    CHECK_THROWS_AS(label_raster(0, 2, 1), invalid_argument);
    CHECK_THROWS_AS(label_raster(2, 2, 0), invalid_argument);
}

TEST_CASE("one by one label raster file layout") {
    scratch tmp;
    label_raster r(1, 1, 1, {-97.0, 0.001, 0.0, 33.0, 0.0, -0.001});
    r.at(0, 0, 0) = 6;
    auto path = tmp / "one.lras";
    write_raster(r, path);
    auto bytes = slurp(path);
    // magic 4 + version 2 + flags 2 + width 4 + height 4 + bands 2 + dtype 1 + reserved 1
    // + 6 coefficients * 8 + nodata 8
    REQUIRE(lras_header_size == 4 + 2 + 2 + 4 + 4 + 2 + 1 + 1 + 6 * 8 + 8);
    CHECK(bytes.size() == lras_header_size + 1);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "LRAS");
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 0);
    CHECK(bytes[8] == 1);   // width, little-endian
    CHECK(bytes[12] == 1);  // height
    CHECK(bytes[16] == 1);  // bands
    CHECK(bytes[18] == 0);  // dtype u8
    double origin_lon = 0.0;
    std::memcpy(&origin_lon, bytes.data() + 20, 8);
    CHECK(origin_lon == -97.0);
    double nodata = 0.0;
    std::memcpy(&nodata, bytes.data() + 68, 8);
    CHECK(nodata == 255.0);
    CHECK(static_cast<unsigned char>(bytes.back()) == 6);
    CHECK(read_label_raster(path) == r);
}

TEST_CASE("round trip is lossless for both sample types") {
    scratch tmp;
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 6; ++trial) {
        std::uniform_int_distribution<std::int64_t> dim(1, 60);
        auto labels = oracle::random_labels(dim(gen), dim(gen), 0.2, gen);
        labels.set_transform({-100.0 + trial, 0.0001, 0.0, 40.0, 0.0, -0.0001});
        write_raster(labels, tmp / "l.lras");
        auto back = read_raster(tmp / "l.lras");
        REQUIRE(std::holds_alternative<label_raster>(back));
        CHECK(std::get<label_raster>(back) == labels);

        auto probs = random_probs(dim(gen), dim(gen), gen);
        write_raster(probs, tmp / "p.lras");
        auto pback = read_prob_raster(tmp / "p.lras");
        CHECK(pback == probs);
        CHECK(pback.transform() == probs.transform());
    }

    label_raster multi(4, 3, 3);
    for (std::int64_t k = 0; k < multi.data().size(); ++k) multi.data()[k] = static_cast<std::uint8_t>(k % 9);
    write_raster(multi, tmp / "m.lras");
    CHECK(read_label_raster(tmp / "m.lras") == multi);
    CHECK_THROWS_AS(read_prob_raster(tmp / "m.lras"), invalid_argument);
}

TEST_CASE("malformed files are rejected with an offset") {
    scratch tmp;
    label_raster r(5, 4, 1);
    r.data().setConstant(2);
    write_raster(r, tmp / "good.lras");
    const auto good = slurp(tmp / "good.lras");

    spill(tmp / "empty.lras", {});
    CHECK_THROWS_AS(read_raster(tmp / "empty.lras"), format_error);

    auto bad = good;
    bad[2] = 'X';
    spill(tmp / "magic.lras", bad);
    try {
        read_raster(tmp / "magic.lras");
        FAIL("bad magic accepted");
    } catch (const format_error& e) {
        CHECK(e.offset() == 2);
    }

    bad = good;
    bad.resize(good.size() - 3);
    spill(tmp / "short.lras", bad);
    CHECK_THROWS_AS(read_raster(tmp / "short.lras"), format_error);

    bad = good;
    bad.resize(30);
    spill(tmp / "header.lras", bad);
    CHECK_THROWS_AS(read_raster(tmp / "header.lras"), format_error);

    bad = good;
    bad.push_back(0);
    spill(tmp / "long.lras", bad);
    CHECK_THROWS_AS(read_raster(tmp / "long.lras"), format_error);

    bad = good;
    bad[18] = 7;
    spill(tmp / "dtype.lras", bad);
    CHECK_THROWS_AS(read_raster(tmp / "dtype.lras"), format_error);

    // absurd dimensions must not be allocated before the size check
    bad = good;
    for (int k = 8; k < 16; ++k) bad[k] = static_cast<char>(0xff);
    spill(tmp / "huge.lras", bad);
    CHECK_THROWS_AS(read_raster(tmp / "huge.lras"), format_error);

    CHECK_THROWS_AS(read_raster(tmp / "absent.lras"), io_error);
}

TEST_CASE("metadata sidecar") {
    scratch tmp;
    auto path = tmp / "batch_3_2019-07-15.lras";
    CHECK(meta_path_for(path).filename() == "batch_3_2019-07-15.meta.json");
    raster_meta m{parse_date("2019-07-15"), 3, 2019};
    write_meta(m, path);
    auto doc = nlohmann::json::parse(std::ifstream(meta_path_for(path)));
    CHECK(doc == nlohmann::json{{"timestamp", "2019-07-15"}, {"batch_id", 3}, {"year", 2019}});
    CHECK(read_meta(path) == m);

    spill(meta_path_for(path), {'{', '}'});
    CHECK_THROWS_AS(read_meta(path), invalid_argument);
    CHECK_THROWS_AS(read_meta(tmp / "none.lras"), io_error);
}

TEST_CASE("argmax labels") {
    prob_raster p(3, 1, num_classes);
    p.data().setZero();
    p.at(6, 0, 0) = 1.0f;                                     // one-hot built
    for (int b = 0; b < num_classes; ++b) p.at(b, 0, 1) = 1.0f / 9.0f;  // uniform tie
    for (int b = 0; b < num_classes; ++b) p.at(b, 0, 2) = p.nodata();
    auto l = argmax_label(p);
    CHECK(l.bands() == 1);
    CHECK(l.at(0, 0, 0) == 6);
    CHECK(l.at(0, 0, 1) == 0);
    CHECK(l.at(0, 0, 2) == 255);

    CHECK_THROWS_AS(argmax_label(prob_raster(2, 2, 3)), invalid_argument);
}

TEST_CASE("argmax agrees with a linear scan") {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_probs(17, 13, gen);
        // plant exact ties and partially missing pixels
        p.at(3, 0, 0) = p.at(5, 0, 0) = 2.0f;
        p.at(0, 1, 1) = p.nodata();
        p.at(4, 1, 1) = p.nodata();
        auto l = argmax_label(p);
        for (std::int64_t k = 0; k < p.pixels(); ++k) {
            CHECK(l.data()[k] == argmax_oracle(p, k));
            CHECK((l.data()[k] <= 8 || l.data()[k] == 255));
        }
        CHECK(l.at(0, 0, 0) == 3);
    }
}

TEST_CASE("crop shifts the origin") {
    label_raster full(6400, 6400, 1, {-97.0, 0.0001, 0.0, 33.0, 0.0, -0.0001});
    auto window = crop(full, {1200, 440, 40, 40});
    CHECK(window.width() == 40);
    CHECK(window.height() == 40);
    CHECK(window.transform()[0] == doctest::Approx(-97.0 + 1200 * 0.0001).epsilon(1e-15));
    CHECK(window.transform()[3] == doctest::Approx(33.0 - 440 * 0.0001).epsilon(1e-15));
    CHECK(window.transform()[1] == 0.0001);
    CHECK(window.transform()[5] == -0.0001);

    std::mt19937_64 gen(2);
    auto small = oracle::random_labels(7, 5, 0.1, gen);
    CHECK(crop(small, {0, 0, 7, 5}) == small);
    CHECK_THROWS_AS(crop(small, {0, 0, 0, 5}), invalid_argument);
    CHECK_THROWS_AS(crop(small, {1, 0, 7, 5}), invalid_argument);
    CHECK_THROWS_AS(crop(small, {-1, 0, 2, 2}), invalid_argument);
}

TEST_CASE("missing pixel flags") {
    prob_raster p(2, 1, 2);
    p.data() << 0.5f, p.nodata(), 0.1f, 0.2f;
    auto m = missing_pixels(p);
    CHECK(!m[0]);
    CHECK(m[1]);
    CHECK(count_missing_pixels(p) == 1);
}

TEST_CASE("synthetic scene without gaps has no nodata") {
    scene_spec s;
    s.width = 64;
    s.height = 48;
    s.years = {2018, 2019};
    s.months = {3, 7};
    s.label_noise = 0.05;
    for (const auto& y : synth_scene(s))
        for (const auto& img : y.labels) {
            CHECK(count_missing_pixels(img.image) == 0);
            CHECK((img.image.data() <= 8).all());
        }
}

TEST_CASE("synthetic gaps cover the requested share") {
    scene_spec s;
    s.width = 80;
    s.height = 60;
    s.years = {2020};
    s.months = {6, 8};
    s.cloud_gap_fraction = 0.25;
    auto y = synth_year(s, 2020);
    REQUIRE(y.labels.size() == 2);
    for (const auto& img : y.labels) CHECK(count_missing_pixels(img.image) == 1200);
    CHECK(y.labels[0].timestamp == parse_date("2020-06-15"));
}

TEST_CASE("synthetic scene growth") {
    for (auto mode : {growth_mode::front, growth_mode::infill}) {
        scene_spec s;
        s.width = 128;
        s.height = 128;
        s.growth = mode;
        s.growth_rate = 3.0;
        s.infill_rate = 0.1;
        std::int64_t prev = -1;
        for (int year : s.years) {
            auto built = count_built(synth_truth(s, year));
            CHECK(built >= prev);
            prev = built;
        }
        CHECK(prev > count_built(synth_truth(s, s.years.front())));
    }

    scene_spec frozen;
    frozen.growth_rate = 0.0;
    auto first = count_built(synth_truth(frozen, 2016));
    for (int year : frozen.years) CHECK(count_built(synth_truth(frozen, year)) == first);
}

TEST_CASE("winter images are snow covered") {
    scene_spec s;
    s.width = 32;
    s.height = 32;
    s.years = {2017};
    s.months = {1, 7, 12};
    s.snow_months = true;
    auto y = synth_year(s, 2017);
    CHECK((y.labels[0].image.data() == 8).all());
    CHECK(!(y.labels[1].image.data() == 8).all());
    CHECK((y.labels[2].image.data() == 8).all());
}

TEST_CASE("synthetic scenes are deterministic") {
    scene_spec s;
    s.width = 50;
    s.height = 40;
    s.years = {2016, 2017};
    s.months = {5, 9};
    s.cloud_gap_fraction = 0.2;
    s.label_noise = 0.03;
    s.probabilities = true;
    auto a = synth_scene(s);
    auto b = synth_scene(s);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        REQUIRE(a[k].probabilities.size() == 2);
        for (std::size_t m = 0; m < 2; ++m) CHECK(a[k].probabilities[m].image == b[k].probabilities[m].image);
    }
    // probability rasters decode to the label they were generated from
    s.probabilities = false;
    auto labels = synth_year(s, 2016);
    CHECK((argmax_label(a[0].probabilities[0].image).data() == labels.labels[0].image.data()).all());

    s.seed = 2;
    CHECK(!(synth_scene(s)[0].labels[0].image == labels.labels[0].image));
}

TEST_CASE("invalid scene specs") {
    scene_spec s;
    s.cloud_gap_fraction = 1.5;
    CHECK_THROWS_AS(s.validate(), invalid_argument);
    s = {};
    s.infill_rate = -0.1;
    CHECK_THROWS_AS(s.validate(), invalid_argument);
    CHECK_THROWS_AS(parse_growth_mode("sprawl"), invalid_argument);
    CHECK(parse_growth_mode("infill") == growth_mode::infill);
}
