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

#include "fishnet/batching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "fishnet/detail/text.hpp"
#include "fishnet/error.hpp"

namespace fishnet::batching {

namespace {

constexpr int manifest_version = 1;

}  // namespace

batch_ref batch_plan::batch(std::int64_t bi, std::int64_t bj) const {
    if (bi < 0 || bi >= _nbx || bj < 0 || bj >= _nby)
        throw invalid_argument("batch index (" + std::to_string(bi) + ", " + std::to_string(bj) +
                               ") outside plan");
    batch_ref b;
    b.bi = bi;
    b.bj = bj;
    b.batch_id = bj * _nbx + bi;
    b.i0 = bi * _tpb_x;
    b.i1 = std::min(b.i0 + _tpb_x, _grid.num_tiles_x()) - 1;
    b.j0 = bj * _tpb_y;
    b.j1 = std::min(b.j0 + _tpb_y, _grid.num_tiles_y()) - 1;

    // union of member tiles; rows differ in longitude step so the east edge is a max over rows
    b.bbox.max_lat = _grid.row_north(b.j0);
    b.bbox.min_lat = _grid.row_north(b.j1 + 1);
    b.bbox.min_lon = _grid.col_west(b.i0, b.j0);
    b.bbox.max_lon = _grid.col_west(b.i1 + 1, b.j0);
    for (std::int64_t j = b.j0; j <= b.j1; ++j) {
        b.bbox.min_lon = std::min(b.bbox.min_lon, _grid.col_west(b.i0, j));
        b.bbox.max_lon = std::max(b.bbox.max_lon, _grid.col_west(b.i1 + 1, j));
    }
    return b;
}

batch_ref batch_plan::batch(std::int64_t batch_id) const {
    if (batch_id < 0 || batch_id >= num_batches())
        throw invalid_argument("batch id " + std::to_string(batch_id) + " outside plan");
    return batch(batch_id % _nbx, batch_id / _nbx);
}

geotransform batch_plan::batch_transform(const batch_ref& b) const {
    const double px = static_cast<double>(_tile_px);
    return {_grid.col_west(b.i0, b.j0), _grid.lon_step(b.j0) / px, 0.0,
            _grid.row_north(b.j0),      0.0,                       -_grid.lat_step() / px};
}

batch_plan plan_batches(const geo::fishnet_grid& grid, double batch_size_m, double resolution_m) {
    const double tile = grid.tile_size_m();
    if (!(tile > 0.0)) throw invalid_argument("plan_batches: grid is empty");
    if (!(batch_size_m >= tile))
        throw invalid_argument("batch size " + std::to_string(batch_size_m) +
                               " m is smaller than the tile size");
    if (!(resolution_m > 0.0) || !std::isfinite(resolution_m))
        throw invalid_argument("resolution must be positive");
    const double px = std::round(tile / resolution_m);
    if (px < 1.0 || std::abs(tile - px * resolution_m) > 1e-6 * tile)
        throw invalid_argument("tile size is not a whole number of pixels at this resolution");

    batch_plan p;
    p._grid = grid;
    p._batch_size_m = batch_size_m;
    p._resolution_m = resolution_m;
    p._tile_px = static_cast<std::int64_t>(px);
    // tolerate rounding when the batch is an exact multiple of the tile size
    auto per_batch = static_cast<std::int64_t>(std::floor(batch_size_m / tile + 1e-9));
    p._tpb_x = p._tpb_y = std::max<std::int64_t>(1, per_batch);
    p._nbx = (grid.num_tiles_x() + p._tpb_x - 1) / p._tpb_x;
    p._nby = (grid.num_tiles_y() + p._tpb_y - 1) / p._tpb_y;
    return p;
}

batch_ref batch_of_tile(const batch_plan& plan, const geo::tile_ref& tile) {
    const auto& g = plan.grid();
    if (tile.i < 0 || tile.i >= g.num_tiles_x() || tile.j < 0 || tile.j >= g.num_tiles_y() ||
        tile.tile_id != tile.j * g.num_tiles_x() + tile.i || !(g.tile(tile.i, tile.j) == tile))
        throw invalid_argument("tile " + std::to_string(tile.tile_id) +
                               " does not belong to the plan's grid");
    return plan.batch(tile.i / plan.tiles_per_batch_x(), tile.j / plan.tiles_per_batch_y());
}

pixel_window tile_pixel_window(const batch_plan& plan, const batch_ref& batch,
                               const geo::tile_ref& tile) {
    if (!batch.contains(tile.i, tile.j))
        throw invalid_argument("tile " + std::to_string(tile.tile_id) + " is not in batch " +
                               std::to_string(batch.batch_id));
    const auto px = plan.tile_px();
    return {(tile.i - batch.i0) * px, (tile.j - batch.j0) * px, px, px};
}

nlohmann::json manifest_json(const batch_plan& plan, const std::vector<int>& years,
                             const seasonal_window& season) {
    if (years.empty()) throw invalid_argument("manifest needs at least one year");
    season.validate();
    nlohmann::json seasons = nlohmann::json::array();
    for (int y : years)
        seasons.push_back({{"year", y},
                           {"start", format_date(season.start_in(y))},
                           {"end", format_date(season.end_in(y))}});
    nlohmann::json bands = nlohmann::json::array();
    for (auto name : class_names) bands.push_back(std::string(name));
    bands.push_back("label");

    nlohmann::json batches = nlohmann::json::array();
    for (std::int64_t id = 0; id < plan.num_batches(); ++id) {
        auto b = plan.batch(id);
        batches.push_back({{"batch_id", b.batch_id},
                           {"bbox", {b.bbox.min_lat, b.bbox.min_lon, b.bbox.max_lat, b.bbox.max_lon}},
                           {"width_px", plan.width_px(b)},
                           {"height_px", plan.height_px(b)}});
    }
    return {{"version", manifest_version},
            {"tile_size_m", plan.grid().tile_size_m()},
            {"batch_size_m", plan.batch_size_m()},
            {"resolution_m", plan.resolution_m()},
            {"grid", geo::to_json(plan.grid())},
            {"seasons", seasons},
            {"bands", bands},
            {"batches", batches}};
}

void write_manifest(const batch_plan& plan, const std::vector<int>& years,
                    const seasonal_window& season, const std::filesystem::path& out_path) {
    auto doc = manifest_json(plan, years, season);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + out_path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw io_error("error writing " + out_path.string());
}

manifest parse_manifest(const nlohmann::json& doc) {
    try {
        if (doc.at("version").get<int>() != manifest_version)
            throw invalid_argument("unsupported manifest version");
        auto grid = geo::grid_from_json(doc.at("grid"));
        if (grid.tile_size_m() != doc.at("tile_size_m").get<double>())
            throw invalid_argument("manifest tile size disagrees with its grid");
        manifest m;
        m.plan = plan_batches(grid, doc.at("batch_size_m").get<double>(),
                              doc.at("resolution_m").get<double>());

        const auto& seasons = doc.at("seasons");
        if (!seasons.is_array() || seasons.empty())
            throw invalid_argument("manifest lists no seasons");
        for (std::size_t k = 0; k < seasons.size(); ++k) {
            const auto& s = seasons[k];
            int year = s.at("year").get<int>();
            auto start = parse_date(s.at("start").get<std::string>());
            auto end = parse_date(s.at("end").get<std::string>());
            seasonal_window w{{start.month(), start.day()}, {end.month(), end.day()}};
            w.validate();
            if (k == 0) m.season = w;
            else if (!(w == m.season)) throw invalid_argument("manifest seasons use different windows");
            if (start.year() != std::chrono::year{year} || end.year() != std::chrono::year{year})
                throw invalid_argument("manifest season dates are not in their year");
            m.years.push_back(year);
        }

        const auto& batches = doc.at("batches");
        if (!batches.is_array() || static_cast<std::int64_t>(batches.size()) != m.plan.num_batches())
            throw invalid_argument("manifest batch list does not match its plan");
        for (const auto& entry : batches) {
            auto b = m.plan.batch(entry.at("batch_id").get<std::int64_t>());
            if (entry.at("width_px").get<std::int64_t>() != m.plan.width_px(b) ||
                entry.at("height_px").get<std::int64_t>() != m.plan.height_px(b))
                throw invalid_argument("manifest batch " + std::to_string(b.batch_id) +
                                       " has inconsistent pixel dimensions");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_argument(std::string("malformed manifest: ") + e.what());
    }
}

manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw invalid_argument("manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_manifest(doc);
}

std::string_view to_string(export_state s) {
    switch (s) {
        case export_state::pending: return "pending";
        case export_state::done: return "done";
        case export_state::failed: return "failed";
    }
    throw invalid_argument("unknown export state");
}

export_state parse_export_state(std::string_view name) {
    for (auto s : {export_state::pending, export_state::done, export_state::failed})
        if (to_string(s) == name) return s;
    throw invalid_argument("unknown export status '" + std::string(name) + "'");
}

void write_export_status_csv(std::vector<export_status_row> rows, const std::filesystem::path& path) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return std::tie(a.batch_id, a.year) < std::tie(b.batch_id, b.year); });
    std::string out(export_status_header);
    out += '\n';
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        if (k > 0 && r.batch_id == rows[k - 1].batch_id && r.year == rows[k - 1].year)
            throw invalid_argument("two export tasks for batch " + std::to_string(r.batch_id) + " year " +
                                   std::to_string(r.year));
        if (r.reason.find_first_of("\r\n") != std::string::npos)
            throw invalid_argument("export reason must fit on one line");
        out += std::to_string(r.batch_id) + ',' + std::to_string(r.year) + ',' + std::string(to_string(r.status)) +
               ',' + r.reason + '\n';
    }
    detail::write_text(path, out);
}

std::vector<export_status_row> read_export_status_csv(const std::filesystem::path& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || lines[0] != export_status_header) throw parse_error("unexpected export status header", 1);
    std::vector<export_status_row> rows;
    std::set<std::pair<std::int64_t, int>> seen;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        if (lines[k].empty()) continue;
        const std::string_view line = lines[k];
        // the reason is everything after the third comma
        std::size_t cut = 0;
        for (int commas = 0; commas < 3; ++commas) {
            cut = line.find(',', cut);
            if (cut == std::string_view::npos) throw parse_error("expected 4 fields", k + 1);
            ++cut;
        }
        auto f = detail::split_csv(line.substr(0, cut - 1));
        export_status_row r;
        r.batch_id = detail::parse_int(f[0], k + 1);
        r.year = static_cast<int>(detail::parse_int(f[1], k + 1));
        try {
            r.status = parse_export_state(f[2]);
        } catch (const invalid_argument& e) {
            throw parse_error(e.what(), k + 1);
        }
        r.reason = std::string(line.substr(cut));
        if (r.batch_id < 0) throw parse_error("negative batch id", k + 1);
        if (!seen.insert({r.batch_id, r.year}).second) throw parse_error("duplicate export task", k + 1);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace fishnet::batching
