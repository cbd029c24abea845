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
#include <string>
#include <string_view>
#include <vector>

#include "fishnet/calendar.hpp"
#include "fishnet/geo.hpp"
#include "fishnet/raster.hpp"

namespace fishnet::batching {

/// Group of tiles exported as one raster. Tile ranges are inclusive.
struct batch_ref {
    std::int64_t batch_id = 0;
    std::int64_t bi = 0;
    std::int64_t bj = 0;
    geo::geo_bbox bbox;
    std::int64_t i0 = 0, i1 = 0;
    std::int64_t j0 = 0, j1 = 0;

    std::int64_t tiles_x() const { return i1 - i0 + 1; }
    std::int64_t tiles_y() const { return j1 - j0 + 1; }
    bool contains(std::int64_t i, std::int64_t j) const {
        return i >= i0 && i <= i1 && j >= j0 && j <= j1;
    }

    friend bool operator==(const batch_ref&, const batch_ref&) = default;
};

/**
 * Partition of a fishnet grid into rectangular batches of at most
 * tiles_per_batch_x x tiles_per_batch_y tiles. Edge batches absorb remainders.
 *
 * A batch raster is laid out on the fishnet lattice: tile (i, j) of the batch
 * occupies the tile_px x tile_px block at ((i - i0) * tile_px, (j - j0) * tile_px).
 */
class batch_plan {
   public:
    batch_plan() = default;

    const geo::fishnet_grid& grid() const { return _grid; }
    double batch_size_m() const { return _batch_size_m; }
    double resolution_m() const { return _resolution_m; }
    std::int64_t tiles_per_batch_x() const { return _tpb_x; }
    std::int64_t tiles_per_batch_y() const { return _tpb_y; }
    std::int64_t num_batches_x() const { return _nbx; }
    std::int64_t num_batches_y() const { return _nby; }
    std::int64_t num_batches() const { return _nbx * _nby; }
    /// Tile side in pixels.
    std::int64_t tile_px() const { return _tile_px; }

    batch_ref batch(std::int64_t bi, std::int64_t bj) const;
    batch_ref batch(std::int64_t batch_id) const;
    std::int64_t width_px(const batch_ref& b) const { return b.tiles_x() * _tile_px; }
    std::int64_t height_px(const batch_ref& b) const { return b.tiles_y() * _tile_px; }
    /// Geotransform of the batch raster, anchored at its north-west tile corner.
    geotransform batch_transform(const batch_ref& b) const;

    friend bool operator==(const batch_plan&, const batch_plan&) = default;

   private:
    friend batch_plan plan_batches(const geo::fishnet_grid&, double, double);

    geo::fishnet_grid _grid;
    double _batch_size_m = 0.0;
    double _resolution_m = 10.0;
    std::int64_t _tpb_x = 1, _tpb_y = 1;
    std::int64_t _nbx = 0, _nby = 0;
    std::int64_t _tile_px = 0;
};

batch_plan plan_batches(const geo::fishnet_grid& grid, double batch_size_m,
                        double resolution_m = 10.0);

batch_ref batch_of_tile(const batch_plan& plan, const geo::tile_ref& tile);

pixel_window tile_pixel_window(const batch_plan& plan, const batch_ref& batch,
                               const geo::tile_ref& tile);

/// Contract between the engine and the exporter: every batch and year to extract.
struct manifest {
    batch_plan plan;
    std::vector<int> years;
    seasonal_window season;
};

nlohmann::json manifest_json(const batch_plan& plan, const std::vector<int>& years,
                             const seasonal_window& season);
void write_manifest(const batch_plan& plan, const std::vector<int>& years,
                    const seasonal_window& season, const std::filesystem::path& out_path);
manifest parse_manifest(const nlohmann::json& doc);
manifest read_manifest(const std::filesystem::path& path);

enum class export_state { pending, done, failed };

std::string_view to_string(export_state s);
export_state parse_export_state(std::string_view name);

/// One extraction task per (batch_id, year), as recorded by the exporter.
struct export_status_row {
    std::int64_t batch_id = 0;
    int year = 0;
    export_state status = export_state::pending;
    std::string reason;  // free text, may contain commas but no line breaks

    friend bool operator==(const export_status_row&, const export_status_row&) = default;
};

inline constexpr std::string_view export_status_header = "batch_id,year,status,reason";

/// Rows are written sorted by (batch_id, year); duplicates are rejected.
void write_export_status_csv(std::vector<export_status_row> rows, const std::filesystem::path& path);
std::vector<export_status_row> read_export_status_csv(const std::filesystem::path& path);

}  // namespace fishnet::batching
