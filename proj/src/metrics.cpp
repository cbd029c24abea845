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

#include "fishnet/metrics.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <tuple>

#include "fishnet/detail/text.hpp"
#include "fishnet/error.hpp"
#include "fishnet/parallel.hpp"

namespace fishnet::metrics {

namespace {

bool key_less(const tile_metrics_row& a, const tile_metrics_row& b) {
    return std::tie(a.tile_id, a.year) < std::tie(b.tile_id, b.year);
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ';';
        out += std::to_string(v[k]);
    }
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ';';
        out += detail::format_double(v[k]);
    }
    return out;
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto semi = s.find(';', start);
        out.push_back(s.substr(start, semi == std::string_view::npos ? semi : semi - start));
        if (semi == std::string_view::npos) return out;
        start = semi + 1;
    }
}

}  // namespace

class_shares class_proportions(const label_raster& r) {
    if (r.bands() != 1) throw invalid_argument("class_proportions expects a single-band label raster");
    std::array<std::int64_t, num_classes> counts{};
    std::int64_t valid = 0;
    for (std::uint8_t v : r.data()) {
        if (is_nodata(v)) continue;
        if (v >= num_classes)
            throw invalid_argument("label value " + std::to_string(v) + " is not a land cover class");
        ++counts[v];
        ++valid;
    }
    class_shares out;
    out.valid_fraction = static_cast<double>(valid) / static_cast<double>(r.pixels());
    if (valid > 0)
        for (int k = 0; k < num_classes; ++k)
            out.proportion[k] = static_cast<double>(counts[k]) / static_cast<double>(valid);
    return out;
}

class_shares class_proportions(const any_raster& r) {
    if (const auto* labels = std::get_if<label_raster>(&r)) return class_proportions(*labels);
    throw invalid_argument("class_proportions expects a label raster, got probabilities");
}

tile_metrics_table::tile_metrics_table(std::vector<tile_metrics_row> rows) : _rows(std::move(rows)) {
    std::sort(_rows.begin(), _rows.end(), key_less);
    for (std::size_t k = 1; k < _rows.size(); ++k)
        if (_rows[k - 1].tile_id == _rows[k].tile_id && _rows[k - 1].year == _rows[k].year)
            throw invalid_argument("duplicate metrics row for tile " + std::to_string(_rows[k].tile_id) +
                                   " year " + std::to_string(_rows[k].year));
}

const tile_metrics_row* tile_metrics_table::find(std::int64_t tile_id, int year) const {
    tile_metrics_row key;
    key.tile_id = tile_id;
    key.year = year;
    auto it = std::lower_bound(_rows.begin(), _rows.end(), key, key_less);
    if (it == _rows.end() || it->tile_id != tile_id || it->year != year) return nullptr;
    return &*it;
}

std::vector<std::int64_t> tile_metrics_table::tile_ids() const {
    std::vector<std::int64_t> ids;
    for (const auto& r : _rows)
        if (ids.empty() || ids.back() != r.tile_id) ids.push_back(r.tile_id);
    return ids;
}

std::vector<int> tile_metrics_table::years() const {
    std::vector<int> ys;
    for (const auto& r : _rows) ys.push_back(r.year);
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    return ys;
}

tile_metrics_table build_table(const batching::batch_plan& plan, const std::vector<int>& years,
                               const batch_raster_source& source, unsigned threads) {
    const auto& grid = plan.grid();
    std::vector<std::vector<tile_metrics_row>> per_batch(static_cast<std::size_t>(plan.num_batches()));

    parallel_for(
        plan.num_batches(),
        [&](std::int64_t id) {
            auto batch = plan.batch(id);
            std::vector<geo::tile_ref> tiles;
            for (auto j = batch.j0; j <= batch.j1; ++j)
                for (auto i = batch.i0; i <= batch.i1; ++i)
                    if (grid.included(j * grid.num_tiles_x() + i)) tiles.push_back(grid.tile(i, j));
            if (tiles.empty()) return;

            auto& rows = per_batch[static_cast<std::size_t>(id)];
            for (int year : years) {
                label_raster r = source(id, year);
                if (r.width() != plan.width_px(batch) || r.height() != plan.height_px(batch) ||
                    r.bands() != 1)
                    throw invalid_argument("raster for batch " + std::to_string(id) + " year " +
                                           std::to_string(year) + " has the wrong dimensions");
                for (const auto& t : tiles) {
                    auto shares = class_proportions(crop(r, batching::tile_pixel_window(plan, batch, t)));
                    rows.push_back({t.tile_id, year, shares.proportion, shares.valid_fraction});
                }
            }
        },
        threads == 0 ? thread_count() : threads);

    std::vector<tile_metrics_row> all;
    for (auto& rows : per_batch) all.insert(all.end(), rows.begin(), rows.end());
    return tile_metrics_table(std::move(all));
}

tile_frame_source frames_from_batches(const batching::batch_plan& plan, batch_raster_source source) {
    // keep the most recently used batch raster per year; sequences visit tiles batch by batch
    struct cache_state {
        std::mutex guard;
        std::map<int, std::pair<std::int64_t, label_raster>> latest;
    };
    auto cache = std::make_shared<cache_state>();
    return [plan, source = std::move(source), cache](std::int64_t tile_id, int year) {
        auto tile = plan.grid().tile(tile_id);
        auto batch = batching::batch_of_tile(plan, tile);
        std::unique_lock lock(cache->guard);
        auto it = cache->latest.find(year);
        if (it == cache->latest.end() || it->second.first != batch.batch_id) {
            lock.unlock();
            auto r = source(batch.batch_id, year);
            lock.lock();
            it = cache->latest.insert_or_assign(year, std::make_pair(batch.batch_id, std::move(r))).first;
        }
        return crop(it->second.second, batching::tile_pixel_window(plan, batch, tile));
    };
}

std::vector<frame_sequence> build_sequences(const tile_metrics_table& table,
                                            const sequence_options& options,
                                            const tile_frame_source& frames) {
    if (options.window < 1) throw invalid_argument("sequence window must be at least 1");
    if (options.horizon < 1) throw invalid_argument("sequence horizon must be at least 1");
    std::vector<frame_sequence> out;
    auto years = table.years();
    if (years.empty()) return out;
    const int first = years.front();
    const int last = years.back();

    for (auto tile_id : table.tile_ids()) {
        for (int t = first + options.window - 1; t + options.horizon <= last; ++t) {
            frame_sequence seq;
            seq.tile_id = tile_id;
            seq.horizon = options.horizon;
            seq.target_year = t + options.horizon;

            const tile_metrics_row* target = table.find(tile_id, seq.target_year);
            if (!target || target->valid_fraction < options.min_valid_fraction) continue;
            seq.target_value = target->built();

            const tile_metrics_row* current = nullptr;
            std::vector<int> source_years;
            bool usable = true;
            for (int y = t - options.window + 1; y <= t; ++y) {
                if (const auto* row = table.find(tile_id, y)) {
                    current = row;
                } else if (current) {
                    seq.imputed_inputs = true;
                } else {
                    usable = false;
                    break;
                }
                if (current->valid_fraction < options.min_valid_fraction) {
                    usable = false;
                    break;
                }
                seq.input_years.push_back(y);
                seq.input_built.push_back(current->built());
                source_years.push_back(current->year);
            }
            if (!usable) continue;
            if (frames)
                for (int y : source_years) seq.frames.push_back(frames(tile_id, y));
            out.push_back(std::move(seq));
        }
    }
    return out;
}

void write_table_csv(const tile_metrics_table& t, const std::filesystem::path& path) {
    std::string out;
    out.reserve(64 + t.size() * 160);
    out += table_csv_header;
    out += '\n';
    for (const auto& r : t.rows()) {
        out += std::to_string(r.tile_id);
        out += ',';
        out += std::to_string(r.year);
        for (double p : r.proportion) {
            out += ',';
            out += detail::format_double(p);
        }
        out += ',';
        out += detail::format_double(r.valid_fraction);
        out += '\n';
    }
    detail::write_text(path, out);
}

tile_metrics_table read_table_csv(const std::filesystem::path& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || lines[0] != table_csv_header)
        throw parse_error("unexpected metrics table header in " + path.string(), 1);
    std::vector<tile_metrics_row> rows;
    std::set<std::pair<std::int64_t, int>> seen;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const std::size_t line_no = k + 1;
        if (lines[k].empty()) continue;
        auto f = detail::split_csv(lines[k]);
        if (f.size() != 3 + num_classes) throw parse_error("expected 12 fields", line_no);
        tile_metrics_row r;
        r.tile_id = detail::parse_int(f[0], line_no);
        r.year = static_cast<int>(detail::parse_int(f[1], line_no));
        for (int c = 0; c < num_classes; ++c) r.proportion[c] = detail::parse_double(f[2 + c], line_no);
        r.valid_fraction = detail::parse_double(f[2 + num_classes], line_no);
        if (!seen.insert({r.tile_id, r.year}).second)
            throw parse_error("duplicate row for tile " + std::to_string(r.tile_id) + " year " +
                                  std::to_string(r.year),
                              line_no);
        rows.push_back(r);
    }
    return tile_metrics_table(std::move(rows));
}

void write_sequences_csv(const std::vector<frame_sequence>& seqs, const std::filesystem::path& path) {
    std::ostringstream out;
    out << sequences_csv_header << '\n';
    for (const auto& s : seqs)
        out << s.tile_id << ',' << s.horizon << ',' << s.target_year << ',' << join_ints(s.input_years)
            << ',' << join_doubles(s.input_built) << ',' << (s.imputed_inputs ? 1 : 0) << ','
            << detail::format_double(s.target_value) << '\n';
    detail::write_text(path, out.str());
}

std::vector<frame_sequence> read_sequences_csv(const std::filesystem::path& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || lines[0] != sequences_csv_header)
        throw parse_error("unexpected sequences header in " + path.string(), 1);
    std::vector<frame_sequence> out;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const std::size_t line_no = k + 1;
        if (lines[k].empty()) continue;
        auto f = detail::split_csv(lines[k]);
        if (f.size() != 7) throw parse_error("expected 7 fields", line_no);
        frame_sequence s;
        s.tile_id = detail::parse_int(f[0], line_no);
        s.horizon = static_cast<int>(detail::parse_int(f[1], line_no));
        s.target_year = static_cast<int>(detail::parse_int(f[2], line_no));
        for (auto y : split_list(f[3])) s.input_years.push_back(static_cast<int>(detail::parse_int(y, line_no)));
        for (auto v : split_list(f[4])) s.input_built.push_back(detail::parse_double(v, line_no));
        s.imputed_inputs = detail::parse_int(f[5], line_no) != 0;
        s.target_value = detail::parse_double(f[6], line_no);
        if (s.input_years.empty() || s.input_years.size() != s.input_built.size())
            throw parse_error("input years and built shares differ in length", line_no);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace fishnet::metrics
