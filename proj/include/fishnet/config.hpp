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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fishnet/calendar.hpp"
#include "fishnet/composite.hpp"
#include "fishnet/forecast.hpp"
#include "fishnet/geo.hpp"
#include "fishnet/synth.hpp"
#include "json.hpp"

namespace fishnet::pipeline {

/// Settings of every pipeline stage. Relative paths are resolved against the config file's directory.
struct pipeline_config {
    geo::geo_bbox bbox;
    /// Set when the region is given as a polygon file; bbox is then its bounding box.
    std::optional<geo::boundary_polygon> polygon;
    double tile_size_m = 400.0;
    double batch_size_m = 64000.0;
    double resolution_m = 10.0;
    double earth_radius_m = geo::mean_earth_radius_m;
    std::vector<int> years;
    seasonal_window season;
    composite::aggregation_op aggregation = composite::aggregation_op::mode;
    int n = 4;
    std::vector<int> horizons{1, 2, 3};
    double tau = 0.01;
    double wmse_weight = 100.0;
    double min_valid_fraction = 0.5;
    forecast::gbt_params gbt;
    std::uint64_t seed = 0;
    std::filesystem::path input_dir;
    std::filesystem::path output_dir;
    forecast::split_fractions split;
    /// Scene parameters for the synth command; size, years and seed come from the rest of the config.
    scene_spec synth;

    void validate() const;
};

/// Throws invalid_argument on unknown keys or invalid values.
pipeline_config parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
/// Throws io_error when the file cannot be read.
pipeline_config load_config(const std::filesystem::path& path);

}  // namespace fishnet::pipeline
