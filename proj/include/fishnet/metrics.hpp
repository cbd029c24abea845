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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string_view>
#include <vector>

#include "fishnet/batching.hpp"
#include "fishnet/geo.hpp"
#include "fishnet/raster.hpp"

namespace fishnet::metrics {

/// Share of valid pixels per class, plus the share of valid pixels overall.
struct class_shares {
    std::array<double, num_classes> proportion{};
    double valid_fraction = 0.0;

    double built() const { return proportion[class_index(land_class::built)]; }
};

/// Proportions over valid pixels only; all zero when no pixel is valid.
class_shares class_proportions(const label_raster& r);
/// Rejects anything but a single-band label raster.
class_shares class_proportions(const any_raster& r);

struct tile_metrics_row {
    std::int64_t tile_id = 0;
    int year = 0;
    std::array<double, num_classes> proportion{};
    double valid_fraction = 0.0;

    double built() const { return proportion[class_index(land_class::built)]; }
    friend bool operator==(const tile_metrics_row&, const tile_metrics_row&) = default;
};

/// Rows keyed by (tile_id, year), kept sorted by key.
class tile_metrics_table {
   public:
    tile_metrics_table() = default;
    /// Sorts the rows; throws invalid_argument on duplicate keys.
    explicit tile_metrics_table(std::vector<tile_metrics_row> rows);

    const std::vector<tile_metrics_row>& rows() const { return _rows; }
    std::size_t size() const { return _rows.size(); }
    bool empty() const { return _rows.empty(); }
    const tile_metrics_row* find(std::int64_t tile_id, int year) const;

    std::vector<std::int64_t> tile_ids() const;
    std::vector<int> years() const;

    friend bool operator==(const tile_metrics_table&, const tile_metrics_table&) = default;

   private:
    std::vector<tile_metrics_row> _rows;
};

/// Corrected label raster of one batch and year; throws data_unavailable when absent.
using batch_raster_source = std::function<label_raster(std::int64_t batch_id, int year)>;

/// One row per (included tile, year). Batches are processed on up to `threads` workers.
tile_metrics_table build_table(const batching::batch_plan& plan, const std::vector<int>& years,
                               const batch_raster_source& source, unsigned threads = 0);

/// Label raster of one tile and year.
using tile_frame_source = std::function<label_raster(std::int64_t tile_id, int year)>;

/// Tile frame source that crops tiles out of batch rasters.
tile_frame_source frames_from_batches(const batching::batch_plan& plan, batch_raster_source source);

/**
 * Sliding-window training example: `window` consecutive input years ending at
 * last input year t, and the built share of the tile in year t + horizon.
 */
struct frame_sequence {
    std::int64_t tile_id = 0;
    std::vector<int> input_years;
    std::vector<double> input_built;
    std::vector<label_raster> frames;  // empty unless a frame source was given
    int target_year = 0;
    double target_value = 0.0;
    int horizon = 1;
    bool imputed_inputs = false;  // some input year was forward-filled

    int last_input_year() const { return input_years.back(); }
};

struct sequence_options {
    int window = 4;
    int horizon = 1;
    /// Windows where an input or target year has less valid coverage are skipped.
    double min_valid_fraction = 0.5;
};

/**
 * Enumerates every window of the table's year span for every tile. A year with
 * no row for a tile is forward-filled from the previous input year; a window
 * whose first year or target year is missing is skipped.
 */
std::vector<frame_sequence> build_sequences(const tile_metrics_table& table,
                                            const sequence_options& options,
                                            const tile_frame_source& frames = {});

inline constexpr std::string_view table_csv_header =
    "tile_id,year,water,trees,grass,flooded_vegetation,crops,shrub_and_scrub,built,bare,"
    "snow_and_ice,valid_fraction";

void write_table_csv(const tile_metrics_table& t, const std::filesystem::path& path);
tile_metrics_table read_table_csv(const std::filesystem::path& path);

inline constexpr std::string_view sequences_csv_header =
    "tile_id,horizon,target_year,input_years,input_built,imputed,target_value";

void write_sequences_csv(const std::vector<frame_sequence>& seqs, const std::filesystem::path& path);
/// Frames are not stored; the returned sequences carry input_built only.
std::vector<frame_sequence> read_sequences_csv(const std::filesystem::path& path);

}  // namespace fishnet::metrics
