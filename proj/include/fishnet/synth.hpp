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
#include <string_view>
#include <vector>

#include "fishnet/calendar.hpp"
#include "fishnet/raster.hpp"

namespace fishnet {

/**
 * Parameters of a deterministic synthetic Dynamic World scene.
 *
 * The scene has a patchy natural background, fixed urban cores and growth
 * kernels. In `front` mode a kernel is a disk of built pixels whose radius
 * increases by growth_rate pixels per year. In `infill` mode a kernel is a
 * development zone of fixed radius whose pixels turn built in random order, a
 * share of roughly infill_rate of the zone per year. Each year holds one image
 * per entry of `months` (on day 15).
 */
enum class growth_mode { front, infill };

growth_mode parse_growth_mode(std::string_view name);

struct scene_spec {
    std::int64_t width = 256;
    std::int64_t height = 256;
    std::vector<int> years = {2016, 2017, 2018, 2019, 2020, 2021, 2022};
    std::uint64_t seed = 1;

    int urban_seeds = 4;
    double growth_rate = 2.0;           // pixels per year
    double initial_radius_min = 8.0;    // pixels
    double initial_radius_max = 24.0;
    growth_mode growth = growth_mode::front;
    double infill_rate = 0.06;          // zone share converted per year, scaled per zone by 0.5 to 1.5
    int static_cores = 3;               // urban disks that never grow
    double static_core_radius_max = 30.0;

    double cloud_gap_fraction = 0.0;    // share of pixels missing per image
    double cloud_radius = 12.0;         // typical gap blob radius in pixels
    double label_noise = 0.0;           // share of pixels relabelled at random per image
    bool snow_months = false;           // December to February images are snow covered
    std::vector<int> months = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    int patch_size = 32;                // background patch side in pixels

    bool probabilities = false;         // emit 9-band f32 rasters instead of labels
    geotransform transform = {0.0, 1.0, 0.0, 0.0, 0.0, -1.0};

    /// Throws invalid_argument for out-of-range fields.
    void validate() const;
};

/// One year of images; exactly one of the two collections is filled depending on spec.probabilities.
struct scene_year {
    int year = 0;
    image_collection<std::uint8_t> labels;
    image_collection<float> probabilities;
};

/// Noise-free land cover of the scene in a given year (no clouds, snow or label noise).
label_raster synth_truth(const scene_spec& spec, int year);

/// Images of a single year; pure function of (spec, year).
scene_year synth_year(const scene_spec& spec, int year);

/// All years of the scene.
std::vector<scene_year> synth_scene(const scene_spec& spec);

}  // namespace fishnet
