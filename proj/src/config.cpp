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

#include "fishnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <string>

#include "fishnet/error.hpp"

namespace fishnet::pipeline {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw invalid_argument(std::string(where) + " must be an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw invalid_argument("unknown key '" + key + "' in " + std::string(where));
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

geo::geo_bbox parse_bbox(const json& doc) {
    check_keys(doc, "region.bbox", {"min_lat", "min_lon", "max_lat", "max_lon"});
    geo::geo_bbox b;
    b.min_lat = doc.at("min_lat").get<double>();
    b.min_lon = doc.at("min_lon").get<double>();
    b.max_lat = doc.at("max_lat").get<double>();
    b.max_lon = doc.at("max_lon").get<double>();
    return b;
}

geo::boundary_polygon load_polygon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open polygon file " + path.string());
    try {
        return geo::boundary_polygon::from_geojson(json::parse(in));
    } catch (const json::parse_error& e) {
        throw invalid_argument("polygon file " + path.string() + " is not valid JSON: " + e.what());
    }
}

void parse_gbt(const json& doc, forecast::gbt_params& p) {
    check_keys(doc, "gbt_params",
               {"num_rounds", "learning_rate", "max_depth", "min_samples_leaf", "subsample", "lambda"});
    read_opt(doc, "num_rounds", p.num_rounds);
    read_opt(doc, "learning_rate", p.learning_rate);
    read_opt(doc, "max_depth", p.max_depth);
    read_opt(doc, "min_samples_leaf", p.min_samples_leaf);
    read_opt(doc, "subsample", p.subsample);
    read_opt(doc, "lambda", p.lambda);
}

void parse_synth(const json& doc, scene_spec& s) {
    check_keys(doc, "synth",
               {"urban_seeds", "growth_rate", "initial_radius_min", "initial_radius_max", "static_cores",
                "static_core_radius_max", "cloud_gap_fraction", "cloud_radius", "label_noise", "snow_months",
                "months", "patch_size", "probabilities", "growth_mode", "infill_rate"});
    read_opt(doc, "urban_seeds", s.urban_seeds);
    read_opt(doc, "growth_rate", s.growth_rate);
    read_opt(doc, "initial_radius_min", s.initial_radius_min);
    read_opt(doc, "initial_radius_max", s.initial_radius_max);
    read_opt(doc, "static_cores", s.static_cores);
    read_opt(doc, "static_core_radius_max", s.static_core_radius_max);
    read_opt(doc, "cloud_gap_fraction", s.cloud_gap_fraction);
    read_opt(doc, "cloud_radius", s.cloud_radius);
    read_opt(doc, "label_noise", s.label_noise);
    read_opt(doc, "snow_months", s.snow_months);
    read_opt(doc, "months", s.months);
    read_opt(doc, "patch_size", s.patch_size);
    read_opt(doc, "probabilities", s.probabilities);
    read_opt(doc, "infill_rate", s.infill_rate);
    if (doc.contains("growth_mode")) s.growth = parse_growth_mode(doc.at("growth_mode").get<std::string>());
}

}  // namespace

void pipeline_config::validate() const {
    geo::validate(bbox);
    if (polygon) polygon->validate();
    for (double v : {tile_size_m, batch_size_m, resolution_m, earth_radius_m})
        if (!(v > 0.0) || !std::isfinite(v)) throw invalid_argument("sizes and radius must be positive");
    if (years.empty()) throw invalid_argument("years must not be empty");
    for (std::size_t k = 1; k < years.size(); ++k)
        if (years[k] != years[k - 1] + 1) throw invalid_argument("years must be consecutive and increasing");
    season.validate();
    if (n < 1) throw invalid_argument("n must be at least 1");
    if (horizons.empty()) throw invalid_argument("horizons must not be empty");
    for (std::size_t k = 0; k < horizons.size(); ++k) {
        if (horizons[k] < 1) throw invalid_argument("horizons must be positive");
        if (k > 0 && horizons[k] <= horizons[k - 1]) throw invalid_argument("horizons must be increasing");
    }
    if (!(tau >= 0.0)) throw invalid_argument("tau must be non-negative");
    if (!(wmse_weight >= 0.0)) throw invalid_argument("wmse_weight must be non-negative");
    if (!(min_valid_fraction >= 0.0 && min_valid_fraction <= 1.0))
        throw invalid_argument("min_valid_fraction must lie in [0, 1]");
    gbt.validate();
    split.validate();
    if (output_dir.empty()) throw invalid_argument("output_dir must be set");
}

pipeline_config parse_config(const json& doc, const std::filesystem::path& base_dir) {
    try {
        check_keys(doc, "config",
                   {"region", "tile_size_m", "batch_size_m", "resolution_m", "earth_radius_m", "years",
                    "seasonal_window", "aggregation_op", "n", "horizons", "tau", "wmse_weight",
                    "min_valid_fraction", "gbt_params", "seed", "input_dir", "output_dir", "split", "synth"});
        pipeline_config c;

        const auto& region = doc.at("region");
        check_keys(region, "region", {"bbox", "polygon"});
        if (region.contains("bbox") == region.contains("polygon"))
            throw invalid_argument("region needs exactly one of bbox or polygon");
        if (region.contains("bbox")) {
            c.bbox = parse_bbox(region.at("bbox"));
        } else {
            c.polygon = load_polygon(resolve(base_dir, region.at("polygon").get<std::string>()));
            c.polygon->validate();
            const auto& ring = c.polygon->ring;
            auto [lat_lo, lat_hi] = std::minmax_element(ring.begin(), ring.end(),
                                                        [](auto& a, auto& b) { return a.lat < b.lat; });
            auto [lon_lo, lon_hi] = std::minmax_element(ring.begin(), ring.end(),
                                                        [](auto& a, auto& b) { return a.lon < b.lon; });
            c.bbox = {lat_lo->lat, lon_lo->lon, lat_hi->lat, lon_hi->lon};
        }

        read_opt(doc, "tile_size_m", c.tile_size_m);
        read_opt(doc, "batch_size_m", c.batch_size_m);
        read_opt(doc, "resolution_m", c.resolution_m);
        read_opt(doc, "earth_radius_m", c.earth_radius_m);
        c.years = doc.at("years").get<std::vector<int>>();
        if (doc.contains("seasonal_window")) {
            const auto& w = doc.at("seasonal_window");
            check_keys(w, "seasonal_window", {"start", "end"});
            if (w.contains("start")) c.season.start = parse_month_day(w.at("start").get<std::string>());
            if (w.contains("end")) c.season.end = parse_month_day(w.at("end").get<std::string>());
        }
        if (doc.contains("aggregation_op"))
            c.aggregation = composite::parse_aggregation(doc.at("aggregation_op").get<std::string>());
        read_opt(doc, "n", c.n);
        read_opt(doc, "horizons", c.horizons);
        read_opt(doc, "tau", c.tau);
        read_opt(doc, "wmse_weight", c.wmse_weight);
        read_opt(doc, "min_valid_fraction", c.min_valid_fraction);
        if (doc.contains("gbt_params")) parse_gbt(doc.at("gbt_params"), c.gbt);
        read_opt(doc, "seed", c.seed);
        c.gbt.seed = c.seed;
        c.output_dir = resolve(base_dir, doc.value("output_dir", std::string("out")));
        c.input_dir = doc.contains("input_dir") ? resolve(base_dir, doc.at("input_dir").get<std::string>())
                                                : c.output_dir / "raw";
        if (doc.contains("split")) {
            const auto& s = doc.at("split");
            check_keys(s, "split", {"train", "val"});
            read_opt(s, "train", c.split.train);
            read_opt(s, "val", c.split.val);
        }
        if (doc.contains("synth")) parse_synth(doc.at("synth"), c.synth);
        c.synth.years = c.years;
        c.synth.seed = c.seed;

        c.validate();
        c.synth.validate();
        return c;
    } catch (const json::exception& e) {
        throw invalid_argument(std::string("malformed config: ") + e.what());
    }
}

pipeline_config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc, std::filesystem::absolute(path).parent_path());
}

}  // namespace fishnet::pipeline
