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

#include "fishnet/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fishnet/error.hpp"

namespace fishnet::geo {

namespace {

constexpr double deg_to_rad = std::numbers::pi / 180.0;

// Relative slack on tile counts so that a span of exactly k tiles does not round up to k + 1.
constexpr double count_tolerance = 1e-9;

std::int64_t tile_count(double span_m, double tile_size_m) {
    double n = std::ceil(span_m / tile_size_m - count_tolerance);
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(n));
}

double cross(const geo_point& o, const geo_point& a, const geo_point& b) {
    return (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon);
}

bool on_segment(const geo_point& a, const geo_point& b, const geo_point& p) {
    return std::min(a.lon, b.lon) <= p.lon && p.lon <= std::max(a.lon, b.lon) &&
           std::min(a.lat, b.lat) <= p.lat && p.lat <= std::max(a.lat, b.lat);
}

bool segments_intersect(const geo_point& p1, const geo_point& p2, const geo_point& q1,
                        const geo_point& q2) {
    double d1 = cross(q1, q2, p1);
    double d2 = cross(q1, q2, p2);
    double d3 = cross(p1, p2, q1);
    double d4 = cross(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && on_segment(q1, q2, p1)) return true;
    if (d2 == 0 && on_segment(q1, q2, p2)) return true;
    if (d3 == 0 && on_segment(p1, p2, q1)) return true;
    if (d4 == 0 && on_segment(p1, p2, q2)) return true;
    return false;
}

nlohmann::json encode_mask(const std::vector<bool>& mask) {
    // alternating run lengths, starting with an excluded run (possibly empty)
    nlohmann::json runs = nlohmann::json::array();
    bool current = false;
    std::int64_t run = 0;
    for (bool v : mask) {
        if (v != current) {
            runs.push_back(run);
            current = v;
            run = 0;
        }
        ++run;
    }
    runs.push_back(run);
    return runs;
}

std::vector<bool> decode_mask(const nlohmann::json& runs, std::int64_t expected) {
    if (!runs.is_array()) throw invalid_argument("grid mask must be an array of run lengths");
    std::vector<bool> mask;
    mask.reserve(static_cast<std::size_t>(expected));
    bool current = false;
    for (const auto& r : runs) {
        auto n = r.get<std::int64_t>();
        if (n < 0) throw invalid_argument("grid mask has a negative run length");
        if (static_cast<std::int64_t>(mask.size()) + n > expected)
            throw invalid_argument("grid mask is longer than the grid");
        mask.insert(mask.end(), static_cast<std::size_t>(n), current);
        current = !current;
    }
    if (static_cast<std::int64_t>(mask.size()) != expected)
        throw invalid_argument("grid mask length " + std::to_string(mask.size()) +
                               " does not match " + std::to_string(expected) + " tiles");
    return mask;
}

}  // namespace

void validate(const geo_point& p) {
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon))
        throw invalid_argument("coordinates must be finite");
    if (p.lat < -90.0 || p.lat > 90.0) throw invalid_argument("latitude out of range [-90, 90]");
    if (p.lon < -180.0 || p.lon >= 180.0)
        throw invalid_argument("longitude out of range [-180, 180)");
}

void validate(const geo_bbox& b) {
    for (double v : {b.min_lat, b.min_lon, b.max_lat, b.max_lon})
        if (!std::isfinite(v)) throw invalid_argument("bounding box coordinates must be finite");
    if (b.min_lat < -90.0 || b.max_lat > 90.0)
        throw invalid_argument("bounding box latitude out of range");
    if (b.min_lon < -180.0 || b.max_lon > 180.0)
        throw invalid_argument("bounding box longitude out of range");
    if (!(b.min_lat < b.max_lat) || !(b.min_lon < b.max_lon))
        throw invalid_argument("bounding box has zero or negative span");
}

double haversine_distance(const geo_point& p1, const geo_point& p2, double radius_m) {
    if (!std::isfinite(p1.lat) || !std::isfinite(p1.lon) || !std::isfinite(p2.lat) ||
        !std::isfinite(p2.lon) || !std::isfinite(radius_m))
        throw invalid_argument("haversine_distance: non-finite input");
    // differences are taken in degrees first so nearby points keep full relative precision
    double dphi = (p2.lat - p1.lat) * deg_to_rad;
    double dlambda = (p2.lon - p1.lon) * deg_to_rad;
    double s_phi = std::sin(0.5 * dphi);
    double s_lambda = std::sin(0.5 * dlambda);
    double h = s_phi * s_phi +
               std::cos(p1.lat * deg_to_rad) * std::cos(p2.lat * deg_to_rad) * s_lambda * s_lambda;
    return 2.0 * radius_m * std::asin(std::min(1.0, std::sqrt(h)));
}

double lat_step_degrees(double tile_size_m, double radius_m) {
    if (!(tile_size_m > 0.0)) throw invalid_argument("tile size must be positive");
    return tile_size_m / (radius_m * deg_to_rad);
}

double lon_step_degrees(double tile_size_m, double at_lat, double radius_m) {
    if (!(tile_size_m > 0.0)) throw invalid_argument("tile size must be positive");
    if (!(std::abs(at_lat) < 90.0))
        throw invalid_argument("degenerate latitude: longitude step undefined at the poles");
    return tile_size_m / (radius_m * std::cos(at_lat * deg_to_rad) * deg_to_rad);
}

void boundary_polygon::validate() const {
    if (ring.size() < 4) throw invalid_argument("polygon ring needs at least 4 points");
    if (!(ring.front() == ring.back())) throw invalid_argument("polygon ring is not closed");
    for (const auto& p : ring) geo::validate(p);
    const std::size_t n = ring.size() - 1;  // number of edges
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            bool adjacent = (b == a + 1) || (a == 0 && b == n - 1);
            if (adjacent) continue;
            if (segments_intersect(ring[a], ring[a + 1], ring[b], ring[b + 1]))
                throw invalid_argument("polygon ring is self-intersecting (edges " +
                                       std::to_string(a) + " and " + std::to_string(b) + ")");
        }
    }
}

bool boundary_polygon::contains(const geo_point& p) const {
    bool inside = false;
    for (std::size_t a = 0, b = ring.size() - 1; a < ring.size(); b = a++) {
        const auto& pa = ring[a];
        const auto& pb = ring[b];
        if ((pa.lat > p.lat) != (pb.lat > p.lat)) {
            double lon_at = pa.lon + (p.lat - pa.lat) / (pb.lat - pa.lat) * (pb.lon - pa.lon);
            if (p.lon < lon_at) inside = !inside;
        }
    }
    return inside;
}

boundary_polygon boundary_polygon::from_geojson(const nlohmann::json& doc) {
    const nlohmann::json* geom = &doc;
    if (doc.contains("type") && doc["type"] == "Feature") geom = &doc.at("geometry");
    if (!geom->contains("type") || (*geom)["type"] != "Polygon")
        throw invalid_argument("expected a GeoJSON Polygon");
    const auto& rings = geom->at("coordinates");
    if (!rings.is_array() || rings.empty()) throw invalid_argument("polygon has no rings");
    boundary_polygon poly;
    for (const auto& c : rings[0]) {
        if (!c.is_array() || c.size() < 2) throw invalid_argument("bad polygon coordinate");
        poly.ring.push_back({c[1].get<double>(), c[0].get<double>()});  // GeoJSON is [lon, lat]
    }
    poly.validate();
    return poly;
}

double fishnet_grid::height_m() const {
    return haversine_distance({_bbox.min_lat, _bbox.min_lon}, {_bbox.max_lat, _bbox.min_lon},
                              _radius_m);
}

double fishnet_grid::width_m() const {
    double widest = std::clamp(0.0, _bbox.min_lat, _bbox.max_lat);
    return _radius_m * std::cos(widest * deg_to_rad) * (_bbox.max_lon - _bbox.min_lon) * deg_to_rad;
}

double fishnet_grid::lon_step(std::int64_t row) const {
    return lon_step_degrees(_tile_size_m, row_north(row), _radius_m);
}

double fishnet_grid::row_north(std::int64_t j) const {
    return _bbox.max_lat - static_cast<double>(j) * _lat_step;
}

double fishnet_grid::col_west(std::int64_t i, std::int64_t j) const {
    return _bbox.min_lon + static_cast<double>(i) * lon_step(j);
}

tile_ref fishnet_grid::tile(std::int64_t i, std::int64_t j) const {
    if (i < 0 || i >= _nx || j < 0 || j >= _ny)
        throw invalid_argument("tile index (" + std::to_string(i) + ", " + std::to_string(j) +
                               ") outside grid");
    double step = lon_step(j);
    tile_ref t;
    t.tile_id = j * _nx + i;
    t.i = i;
    t.j = j;
    t.bbox.max_lat = row_north(j);
    t.bbox.min_lat = row_north(j + 1);
    t.bbox.min_lon = _bbox.min_lon + static_cast<double>(i) * step;
    t.bbox.max_lon = _bbox.min_lon + static_cast<double>(i + 1) * step;
    return t;
}

tile_ref fishnet_grid::tile(std::int64_t tile_id) const {
    if (tile_id < 0 || tile_id >= num_tiles())
        throw invalid_argument("tile id " + std::to_string(tile_id) + " outside grid");
    return tile(tile_id % _nx, tile_id / _nx);
}

bool fishnet_grid::included(std::int64_t tile_id) const {
    if (tile_id < 0 || tile_id >= num_tiles()) return false;
    return !_mask || (*_mask)[static_cast<std::size_t>(tile_id)];
}

std::int64_t fishnet_grid::num_included() const {
    if (!_mask) return num_tiles();
    return std::count(_mask->begin(), _mask->end(), true);
}

fishnet_grid fishnet_grid::with_mask(std::vector<bool> mask) const {
    if (static_cast<std::int64_t>(mask.size()) != num_tiles())
        throw invalid_argument("mask size does not match the number of tiles");
    fishnet_grid g = *this;
    g._mask = std::make_shared<const std::vector<bool>>(std::move(mask));
    return g;
}

bool operator==(const fishnet_grid& a, const fishnet_grid& b) {
    if (!(a._bbox == b._bbox) || a._tile_size_m != b._tile_size_m || a._radius_m != b._radius_m ||
        a._nx != b._nx || a._ny != b._ny)
        return false;
    if (a.has_mask() != b.has_mask()) return false;
    return !a.has_mask() || *a._mask == *b._mask;
}

fishnet_grid generate_fishnet(const geo_bbox& bbox, double tile_size_m, double radius_m) {
    validate(bbox);
    if (!(tile_size_m > 0.0) || !std::isfinite(tile_size_m))
        throw invalid_argument("tile size must be positive");
    if (!(radius_m > 0.0)) throw invalid_argument("earth radius must be positive");
    if (!(bbox.max_lat < 90.0)) throw invalid_argument("degenerate latitude: box touches the pole");

    fishnet_grid g;
    g._bbox = bbox;
    g._tile_size_m = tile_size_m;
    g._radius_m = radius_m;
    g._lat_step = lat_step_degrees(tile_size_m, radius_m);
    g._ny = tile_count(g.height_m(), tile_size_m);
    g._nx = tile_count(g.width_m(), tile_size_m);
    if (!(g.row_north(g._ny) > -90.0))
        throw invalid_argument("degenerate latitude: grid rows reach the pole");
    return g;
}

std::optional<tile_ref> locate(const fishnet_grid& grid, const geo_point& p) {
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon)) return std::nullopt;
    const auto ny = grid.num_tiles_y();
    const auto nx = grid.num_tiles_x();
    if (!(p.lat < grid.row_north(0) && p.lat >= grid.row_north(ny))) return std::nullopt;

    // the analytic index can be off by one near edges; settle against the exact edge values
    auto j = static_cast<std::int64_t>(std::floor((grid.bbox().max_lat - p.lat) / grid.lat_step()));
    j = std::clamp<std::int64_t>(j, 0, ny - 1);
    while (p.lat >= grid.row_north(j)) --j;
    while (p.lat < grid.row_north(j + 1)) ++j;

    if (!(p.lon >= grid.col_west(0, j) && p.lon < grid.col_west(nx, j))) return std::nullopt;
    auto i = static_cast<std::int64_t>(std::floor((p.lon - grid.bbox().min_lon) / grid.lon_step(j)));
    i = std::clamp<std::int64_t>(i, 0, nx - 1);
    while (p.lon < grid.col_west(i, j)) --i;
    while (p.lon >= grid.col_west(i + 1, j)) ++i;

    tile_ref t = grid.tile(i, j);
    if (!grid.included(t.tile_id)) return std::nullopt;
    return t;
}

fishnet_grid filter_by_polygon(const fishnet_grid& grid, const boundary_polygon& poly) {
    poly.validate();
    std::vector<bool> mask(static_cast<std::size_t>(grid.num_tiles()), false);
    for (std::int64_t j = 0; j < grid.num_tiles_y(); ++j) {
        for (std::int64_t i = 0; i < grid.num_tiles_x(); ++i) {
            auto t = grid.tile(i, j);
            if (grid.included(t.tile_id) && poly.contains(t.bbox.center()))
                mask[static_cast<std::size_t>(t.tile_id)] = true;
        }
    }
    return grid.with_mask(std::move(mask));
}

nlohmann::json to_json(const fishnet_grid& grid) {
    const auto& b = grid.bbox();
    nlohmann::json doc = {
        {"bbox", {b.min_lat, b.min_lon, b.max_lat, b.max_lon}},
        {"tile_size_m", grid.tile_size_m()},
        {"num_tiles_x", grid.num_tiles_x()},
        {"num_tiles_y", grid.num_tiles_y()},
        {"earth_radius_m", grid.earth_radius_m()},
    };
    if (grid.has_mask()) doc["mask"] = encode_mask(*grid.mask());
    return doc;
}

fishnet_grid grid_from_json(const nlohmann::json& doc) {
    try {
        const auto& bb = doc.at("bbox");
        if (!bb.is_array() || bb.size() != 4) throw invalid_argument("grid bbox must have 4 values");
        geo_bbox bbox{bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                      bb[3].get<double>()};
        auto grid = generate_fishnet(bbox, doc.at("tile_size_m").get<double>(),
                                     doc.at("earth_radius_m").get<double>());
        if (grid.num_tiles_x() != doc.at("num_tiles_x").get<std::int64_t>() ||
            grid.num_tiles_y() != doc.at("num_tiles_y").get<std::int64_t>())
            throw invalid_argument("grid tile counts do not match its geometry");
        if (doc.contains("mask")) grid = grid.with_mask(decode_mask(doc["mask"], grid.num_tiles()));
        return grid;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_argument(std::string("malformed grid document: ") + e.what());
    }
}

}  // namespace fishnet::geo
