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

#include "fishnet/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <map>
#include <sstream>

#include "fishnet/composite.hpp"
#include "fishnet/detail/text.hpp"
#include "fishnet/error.hpp"
#include "fishnet/forecast.hpp"
#include "fishnet/metrics.hpp"
#include "fishnet/parallel.hpp"
#include "fishnet/raster.hpp"
#include "fishnet/synth.hpp"

namespace fishnet::pipeline {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_json(const nlohmann::json& doc, const fs::path& path) { detail::write_text(path, doc.dump(1) + "\n"); }

void require(const fs::path& p, std::string_view stage) {
    if (!fs::exists(p))
        throw data_unavailable(p.string() + " is missing; run the " + std::string(stage) + " command first");
}

metrics::batch_raster_source corrected_source(const artifact_paths& out) {
    return [out](std::int64_t batch_id, int year) {
        auto p = out.corrected(batch_id, year);
        if (!fs::exists(p))
            throw data_unavailable("no corrected raster for batch " + std::to_string(batch_id) + " year " +
                                   std::to_string(year));
        return read_label_raster(p);
    };
}

// Frames for forward-filled years repeat the most recent available year.
void attach_frames(std::vector<metrics::frame_sequence>& seqs, const metrics::tile_frame_source& frames,
                   const metrics::tile_metrics_table& table) {
    for (auto& s : seqs) {
        s.frames.clear();
        int source = s.input_years.front();
        for (int y : s.input_years) {
            if (table.find(s.tile_id, y)) source = y;
            s.frames.push_back(frames(s.tile_id, source));
        }
    }
}

forecast::xgclm_options model_options(const pipeline_config& c) {
    forecast::xgclm_options o;
    o.classifier = c.gbt;
    o.classifier.loss = forecast::loss_kind::logistic;
    o.regressor = c.gbt;
    o.regressor.loss = forecast::loss_kind::squared;
    o.tau = c.tau;
    o.wmse_weight = c.wmse_weight;
    return o;
}

std::vector<metrics::frame_sequence> read_sequences_checked(const pipeline_config& c, const artifact_paths& out) {
    require(out.sequences(), "sequences");
    auto seqs = metrics::read_sequences_csv(out.sequences());
    for (const auto& s : seqs)
        if (static_cast<int>(s.input_years.size()) != c.n)
            throw invalid_argument("sequences.csv was built with a different window length than n = " +
                                   std::to_string(c.n));
    return seqs;
}

}  // namespace

fs::path artifact_paths::corrected(std::int64_t batch_id, int year) const {
    return corrected_dir() / ("batch_" + std::to_string(batch_id) + "_" + std::to_string(year) + ".lras");
}

output_lock::output_lock(const fs::path& dir) {
    ensure_dir(dir);
    const auto path = dir / ".fishnet.lock";
    _fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (_fd < 0) throw io_error("cannot open lock file " + path.string() + ": " + std::strerror(errno));
    if (::flock(_fd, LOCK_EX | LOCK_NB) != 0) {
        ::close(_fd);
        _fd = -1;
        throw io_error("output directory " + dir.string() + " is locked by another fishnet process");
    }
}

output_lock::~output_lock() {
    if (_fd >= 0) {
        ::flock(_fd, LOCK_UN);
        ::close(_fd);
    }
}

geo::fishnet_grid make_grid(const pipeline_config& c) {
    auto grid = geo::generate_fishnet(c.bbox, c.tile_size_m, c.earth_radius_m);
    if (c.polygon) grid = geo::filter_by_polygon(grid, *c.polygon);
    return grid;
}

batching::batch_plan make_plan(const pipeline_config& c) {
    return batching::plan_batches(make_grid(c), c.batch_size_m, c.resolution_m);
}

const std::vector<std::string_view>& command_names() {
    static const std::vector<std::string_view> names{"fishnet", "plan",  "synth",   "correct", "metrics",
                                                     "sequences", "train", "predict", "evaluate"};
    return names;
}

void run_command(std::string_view name, const pipeline_config& c) {
    output_lock lock(c.output_dir);
    if (name == "fishnet") return run_fishnet(c);
    if (name == "plan") return run_plan(c);
    if (name == "synth") return run_synth(c);
    if (name == "correct") return run_correct(c);
    if (name == "metrics") return run_metrics(c);
    if (name == "sequences") return run_sequences(c);
    if (name == "train") return run_train(c);
    if (name == "predict") return run_predict(c);
    if (name == "evaluate") return run_evaluate(c);
    throw invalid_argument("unknown command '" + std::string(name) + "'");
}

void run_fishnet(const pipeline_config& c) {
    artifact_paths out{c.output_dir};
    ensure_dir(out.root);
    write_json(geo::to_json(make_grid(c)), out.grid());
}

void run_plan(const pipeline_config& c) {
    artifact_paths out{c.output_dir};
    ensure_dir(out.root);
    auto plan = make_plan(c);
    write_json(geo::to_json(plan.grid()), out.grid());
    batching::write_manifest(plan, c.years, c.season, out.manifest());
}

void run_synth(const pipeline_config& c) {
    auto plan = make_plan(c);
    const auto& grid = plan.grid();
    scene_spec spec = c.synth;
    spec.width = grid.num_tiles_x() * plan.tile_px();
    spec.height = grid.num_tiles_y() * plan.tile_px();
    spec.years = c.years;
    spec.seed = c.seed;
    ensure_dir(c.input_dir);

    for (int year : c.years) {
        auto scene = synth_year(spec, year);
        parallel_for(plan.num_batches(), [&](std::int64_t id) {
            auto batch = plan.batch(id);
            const pixel_window w{batch.i0 * plan.tile_px(), batch.j0 * plan.tile_px(), plan.width_px(batch),
                                 plan.height_px(batch)};
            auto emit = [&](const auto& collection) {
                for (const auto& item : collection) {
                    auto img = crop(item.image, w);
                    img.set_transform(plan.batch_transform(batch));
                    auto path = c.input_dir /
                                ("batch_" + std::to_string(id) + "_" + std::to_string(year) + "_" +
                                 format_date(item.timestamp) + ".lras");
                    write_raster(img, path);
                    write_meta({item.timestamp, id, year}, path);
                }
            };
            if (spec.probabilities) emit(scene.probabilities);
            else emit(scene.labels);
        });
    }

    std::vector<batching::export_status_row> status;
    for (std::int64_t id = 0; id < plan.num_batches(); ++id)
        for (int year : c.years) status.push_back({id, year, batching::export_state::done, ""});
    batching::write_export_status_csv(std::move(status), c.input_dir / export_status_name);
}

void run_correct(const pipeline_config& c) {
    artifact_paths out{c.output_dir};
    if (!fs::is_directory(c.input_dir)) throw data_unavailable("input directory " + c.input_dir.string() + " is missing");
    if (fs::exists(c.input_dir / export_status_name)) {
        for (const auto& task : batching::read_export_status_csv(c.input_dir / export_status_name)) {
            if (task.status == batching::export_state::done) continue;
            throw data_unavailable("export of batch " + std::to_string(task.batch_id) + " year " +
                                   std::to_string(task.year) + " is " + std::string(to_string(task.status)) +
                                   (task.reason.empty() ? "" : ": " + task.reason));
        }
    }

    std::map<std::pair<std::int64_t, int>, std::vector<std::pair<raster_meta, fs::path>>> groups;
    for (const auto& entry : fs::directory_iterator(c.input_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".lras") continue;
        auto meta = read_meta(entry.path());
        if (static_cast<int>(meta.timestamp.year()) != meta.year)
            throw invalid_argument(entry.path().string() + ": timestamp does not fall in the stated year");
        groups[{meta.batch_id, meta.year}].emplace_back(meta, entry.path());
    }
    if (groups.empty()) throw data_unavailable("no input rasters in " + c.input_dir.string());
    ensure_dir(out.corrected_dir());

    std::vector<std::pair<std::int64_t, int>> keys;
    for (auto& [key, items] : groups) {
        std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
            return std::tie(a.first.timestamp, a.second) < std::tie(b.first.timestamp, b.second);
        });
        keys.push_back(key);
    }

    std::vector<composite::composite_report> reports(keys.size());
    parallel_for(static_cast<std::int64_t>(keys.size()), [&](std::int64_t k) {
        const auto& items = groups.at(keys[k]);
        image_collection<std::uint8_t> labels;
        image_collection<float> probs;
        for (const auto& [meta, path] : items) {
            auto r = read_raster(path);
            if (auto* l = std::get_if<label_raster>(&r)) labels.push_back({meta.timestamp, std::move(*l)});
            else probs.push_back({meta.timestamp, std::move(std::get<prob_raster>(r))});
        }
        if (!labels.empty() && !probs.empty())
            throw invalid_argument("batch " + std::to_string(keys[k].first) + " year " +
                                   std::to_string(keys[k].second) + " mixes label and probability rasters");
        label_raster result;
        composite::composite_report report;
        if (!labels.empty()) {
            std::tie(result, report) = composite::correct_year(labels, labels, c.aggregation, c.season);
        } else {
            auto op = c.aggregation == composite::aggregation_op::mode ? composite::aggregation_op::mean
                                                                       : c.aggregation;
            auto [comp, rep] = composite::correct_year(probs, probs, op, c.season);
            result = argmax_label(comp);
            report = rep;
        }
        report.batch_id = keys[k].first;
        report.year = keys[k].second;
        write_raster(result, out.corrected(keys[k].first, keys[k].second));
        reports[static_cast<std::size_t>(k)] = report;
    });
    composite::write_reports_csv(reports, out.composite_report());
}

void run_metrics(const pipeline_config& c) {
    artifact_paths out{c.output_dir};
    require(out.corrected_dir(), "correct");
    auto table = metrics::build_table(make_plan(c), c.years, corrected_source(out));
    metrics::write_table_csv(table, out.table());
}

void run_sequences(const pipeline_config& c) {
    artifact_paths out{c.output_dir};
    require(out.table(), "metrics");
    auto table = metrics::read_table_csv(out.table());
    std::vector<metrics::frame_sequence> all;
    for (int h : c.horizons) {
        auto seqs = metrics::build_sequences(table, {c.n, h, c.min_valid_fraction});
        all.insert(all.end(), std::make_move_iterator(seqs.begin()), std::make_move_iterator(seqs.end()));
    }
    metrics::write_sequences_csv(all, out.sequences());
}

void run_train(const pipeline_config& c) {
    artifact_paths out{c.output_dir};
    auto seqs = read_sequences_checked(c, out);
    require(out.table(), "metrics");
    auto table = metrics::read_table_csv(out.table());
    auto plan = make_plan(c);

    std::vector<metrics::frame_sequence> train, val;
    for (auto& s : seqs) {
        auto part = forecast::assign_split(plan.grid(), s.tile_id, c.split);
        if (part == forecast::split_part::train) train.push_back(std::move(s));
        else if (part == forecast::split_part::val) val.push_back(std::move(s));
    }
    if (train.empty()) throw data_unavailable("no training sequences in the training region");
    attach_frames(val, metrics::frames_from_batches(plan, corrected_source(out)), table);

    auto options = model_options(c);
    forecast::write_model(forecast::xgclm_train(train, val, options), out.model());
    forecast::write_model(forecast::static_only_train(train, options), out.baseline());
}

void run_predict(const pipeline_config& c) {
    artifact_paths out{c.output_dir};
    require(out.model(), "train");
    require(out.table(), "metrics");
    auto model = forecast::read_model(out.model());
    if (model.window != c.n) throw invalid_argument("model window differs from n in the config");
    auto table = metrics::read_table_csv(out.table());
    auto plan = make_plan(c);
    auto frames = metrics::frames_from_batches(plan, corrected_source(out));
    if (static_cast<int>(c.years.size()) < c.n) throw invalid_argument("fewer years than the input window");
    const int last = c.years.back();

    std::ostringstream csv;
    csv << "tile_id,horizon,target_year,prediction,active_probability,branch,fallback\n";
    for (auto tile_id : table.tile_ids()) {
        metrics::frame_sequence seq;
        seq.tile_id = tile_id;
        const metrics::tile_metrics_row* current = nullptr;
        for (int y = last - c.n + 1; y <= last; ++y) {
            if (const auto* row = table.find(tile_id, y)) current = row;
            else seq.imputed_inputs = true;
            if (!current) break;
            seq.input_years.push_back(y);
            seq.input_built.push_back(current->built());
            seq.frames.push_back(frames(tile_id, current->year));
        }
        if (static_cast<int>(seq.input_years.size()) != c.n) continue;
        for (int h : c.horizons) {
            seq.horizon = h;
            seq.target_year = last + h;
            auto r = forecast::xgclm_predict(model, seq);
            csv << tile_id << ',' << h << ',' << seq.target_year << ',' << detail::format_double(r.value) << ','
                << detail::format_double(r.active_probability) << ','
                << (r.routed_active && !r.fallback ? "active" : "static") << ',' << (r.fallback ? 1 : 0) << '\n';
        }
    }
    detail::write_text(out.predictions(), csv.str());
}

void run_evaluate(const pipeline_config& c) {
    artifact_paths out{c.output_dir};
    auto seqs = read_sequences_checked(c, out);
    require(out.model(), "train");
    require(out.baseline(), "train");
    require(out.table(), "metrics");
    auto model = forecast::read_model(out.model());
    auto baseline = forecast::read_model(out.baseline());
    auto table = metrics::read_table_csv(out.table());
    auto plan = make_plan(c);

    // one window per test tile: the latest one that still reaches the longest horizon
    const int anchor = c.years.back() - c.horizons.back();
    std::vector<metrics::frame_sequence> test;
    for (auto& s : seqs)
        if (s.last_input_year() == anchor &&
            forecast::assign_split(plan.grid(), s.tile_id, c.split) == forecast::split_part::test)
            test.push_back(std::move(s));
    if (test.empty()) throw invalid_argument("empty test set");
    attach_frames(test, metrics::frames_from_batches(plan, corrected_source(out)), table);

    forecast::write_eval_csv(forecast::evaluate(model, test, c.horizons, c.tau, c.wmse_weight), out.eval());
    forecast::write_eval_csv(forecast::evaluate(baseline, test, c.horizons, c.tau, c.wmse_weight),
                             out.eval_baseline());
}

}  // namespace fishnet::pipeline
