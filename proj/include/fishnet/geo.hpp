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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace fishnet::geo {

/// Mean Earth radius in meters.
inline constexpr double mean_earth_radius_m = 6371000.0;

struct geo_point {
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, [-180, 180)

    friend bool operator==(const geo_point&, const geo_point&) = default;
};

/// Throws invalid_argument unless the point is finite and in range.
void validate(const geo_point& p);

/// Axis-aligned box in degrees. Containment is half-open: [min_lon, max_lon) x [min_lat, max_lat).
struct geo_bbox {
    double min_lat = 0.0;
    double min_lon = 0.0;
    double max_lat = 0.0;
    double max_lon = 0.0;

    bool contains(const geo_point& p) const {
        return p.lat >= min_lat && p.lat < max_lat && p.lon >= min_lon && p.lon < max_lon;
    }
    geo_point center() const { return {0.5 * (min_lat + max_lat), 0.5 * (min_lon + max_lon)}; }

    friend bool operator==(const geo_bbox&, const geo_bbox&) = default;
};

void validate(const geo_bbox& b);

/// Great-circle distance by the haversine formula.
double haversine_distance(const geo_point& p1, const geo_point& p2,
                          double radius_m = mean_earth_radius_m);

/// Degrees of latitude spanned by `tile_size_m` meters along a meridian.
double lat_step_degrees(double tile_size_m, double radius_m = mean_earth_radius_m);

/// Degrees of longitude spanned by `tile_size_m` meters along the parallel at `at_lat`.
double lon_step_degrees(double tile_size_m, double at_lat, double radius_m = mean_earth_radius_m);

struct tile_ref {
    std::int64_t tile_id = 0;
    std::int64_t i = 0;  // column, west to east
    std::int64_t j = 0;  // row, north to south
    geo_bbox bbox;

    friend bool operator==(const tile_ref&, const tile_ref&) = default;
};

/// Closed ring of lat/lon vertices (first == last).
struct boundary_polygon {
    std::vector<geo_point> ring;

    /// Throws invalid_argument for open, short or self-intersecting rings.
    void validate() const;
    /// Even-odd rule in the lon/lat plane.
    bool contains(const geo_point& p) const;

    /// Parses a GeoJSON Polygon geometry or a Feature wrapping one; only the outer ring is used.
    static boundary_polygon from_geojson(const nlohmann::json& doc);
};

/**
 * Regular partition of a bounding box into square tiles of a fixed size in meters.
 *
 * Row 0 sits on the northern edge of the box and rows advance southwards by a
 * constant latitude step. Each row uses its own longitude step, computed at the
 * row's northern latitude, so every tile's top edge is tile_size_m long.
 * Tiles are never materialized; any tile is derived from its (i, j) index.
 */
class fishnet_grid {
   public:
    fishnet_grid() = default;

    const geo_bbox& bbox() const { return _bbox; }
    double tile_size_m() const { return _tile_size_m; }
    double earth_radius_m() const { return _radius_m; }
    std::int64_t num_tiles_x() const { return _nx; }
    std::int64_t num_tiles_y() const { return _ny; }
    std::int64_t num_tiles() const { return _nx * _ny; }

    /// Meridian span of the box (haversine).
    double height_m() const;
    /// Length of the box's widest parallel, the one closest to the equator.
    double width_m() const;

    double lat_step() const { return _lat_step; }
    double lon_step(std::int64_t row) const;
    /// Northern latitude of row j; the southern edge of row j is row_north(j + 1).
    double row_north(std::int64_t j) const;
    /// Western longitude of column i in row j.
    double col_west(std::int64_t i, std::int64_t j) const;

    tile_ref tile(std::int64_t i, std::int64_t j) const;
    tile_ref tile(std::int64_t tile_id) const;

    bool has_mask() const { return static_cast<bool>(_mask); }
    const std::vector<bool>* mask() const { return _mask.get(); }
    bool included(std::int64_t tile_id) const;
    std::int64_t num_included() const;

    /// Copy of this grid carrying an inclusion mask of num_tiles() entries.
    fishnet_grid with_mask(std::vector<bool> mask) const;

    friend bool operator==(const fishnet_grid& a, const fishnet_grid& b);

   private:
    friend fishnet_grid generate_fishnet(const geo_bbox&, double, double);

    geo_bbox _bbox;
    double _tile_size_m = 0.0;
    double _radius_m = mean_earth_radius_m;
    std::int64_t _nx = 0;
    std::int64_t _ny = 0;
    double _lat_step = 0.0;
    std::shared_ptr<const std::vector<bool>> _mask;
};

fishnet_grid generate_fishnet(const geo_bbox& bbox, double tile_size_m,
                              double radius_m = mean_earth_radius_m);

/// Tile whose half-open box contains p; none if p lies outside the grid or in a masked tile.
std::optional<tile_ref> locate(const fishnet_grid& grid, const geo_point& p);

/// Masks out every tile whose center is outside the polygon (combined with any existing mask).
fishnet_grid filter_by_polygon(const fishnet_grid& grid, const boundary_polygon& poly);

nlohmann::json to_json(const fishnet_grid& grid);
/// Throws invalid_argument if the stored counts disagree with the geometry.
fishnet_grid grid_from_json(const nlohmann::json& doc);

}  // namespace fishnet::geo
