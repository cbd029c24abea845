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

#include "fishnet/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "fishnet/detail/text.hpp"
#include "fishnet/error.hpp"
#include "fishnet/loss.hpp"

namespace fishnet::forecast {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::vector<frame_sequence> select(const std::vector<frame_sequence>& seqs, double tau, activity_label want) {
    std::vector<frame_sequence> out;
    for (const auto& s : seqs)
        if (label_activity(s, tau) == want) out.push_back(s);
    return out;
}

Eigen::VectorXd targets(const std::vector<frame_sequence>& seqs) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(seqs.size()));
    for (std::size_t k = 0; k < seqs.size(); ++k) y(static_cast<Eigen::Index>(k)) = seqs[k].target_value;
    return y;
}

Eigen::VectorXd activity_flags(const std::vector<frame_sequence>& seqs, double tau) {
    Eigen::VectorXd a(static_cast<Eigen::Index>(seqs.size()));
    for (std::size_t k = 0; k < seqs.size(); ++k)
        a(static_cast<Eigen::Index>(k)) = label_activity(seqs[k], tau) == activity_label::active ? 1.0 : 0.0;
    return a;
}

void check_window(const std::vector<frame_sequence>& seqs, int window) {
    for (const auto& s : seqs)
        if (static_cast<int>(s.input_built.size()) != window)
            throw invalid_argument("sequences mix input window lengths");
}

double static_prediction(const xgclm_model& m, const frame_sequence& seq) {
    return m.static_regressor.predict(tabular_features(seq, true));
}

// Metrics over a subset; NaN when the subset is empty or r2 is undefined.
eval_row score_group(int horizon, std::string branch, const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat,
                     const Eigen::VectorXd& alpha, double weight) {
    eval_row row;
    row.horizon = horizon;
    row.branch = std::move(branch);
    row.n_tiles = y.size();
    if (y.size() == 0) {
        row.mse = row.wmse = row.r2 = nan;
        return row;
    }
    row.mse = mse(y, y_hat);
    row.wmse = wmse(y, y_hat, alpha, weight);
    try {
        row.r2 = r2(y, y_hat);
    } catch (const error&) {
        row.r2 = nan;
    }
    return row;
}

}  // namespace

activity_label label_activity(std::span<const double> built, double tau) {
    if (built.empty()) throw invalid_argument("activity needs at least one value");
    if (!(tau >= 0.0)) throw invalid_argument("tau must be non-negative");
    return built.back() - built.front() >= tau ? activity_label::active : activity_label::stable;
}

activity_label label_activity(const frame_sequence& seq, double tau) { return label_activity(seq.input_built, tau); }

std::vector<std::pair<std::int64_t, activity_label>> label_activity(const metrics::tile_metrics_table& table,
                                                                    const std::vector<int>& window_years,
                                                                    double tau) {
    if (window_years.empty()) throw invalid_argument("activity window has no years");
    std::vector<std::pair<std::int64_t, activity_label>> out;
    std::vector<double> built;
    for (auto tile_id : table.tile_ids()) {
        built.clear();
        for (int y : window_years) {
            const auto* row = table.find(tile_id, y);
            if (!row)
                throw data_unavailable("tile " + std::to_string(tile_id) + " has no metrics for year " +
                                       std::to_string(y));
            built.push_back(row->built());
        }
        out.emplace_back(tile_id, label_activity(built, tau));
    }
    return out;
}

Eigen::RowVectorXd tabular_features(const frame_sequence& seq, bool with_horizon) {
    const auto n = static_cast<Eigen::Index>(seq.input_built.size());
    if (n == 0) throw invalid_argument("sequence has no inputs");
    Eigen::RowVectorXd f(2 * n + (with_horizon ? 1 : 0));
    for (Eigen::Index k = 0; k < n; ++k) f(k) = seq.input_built[static_cast<std::size_t>(k)];
    for (Eigen::Index k = 1; k < n; ++k) f(n + k - 1) = f(k) - f(k - 1);
    f(2 * n - 1) = seq.imputed_inputs ? 1.0 : 0.0;
    if (with_horizon) f(2 * n) = seq.horizon;
    return f;
}

Eigen::MatrixXd feature_matrix(const std::vector<frame_sequence>& seqs, bool with_horizon) {
    if (seqs.empty()) return {};
    Eigen::MatrixXd X(static_cast<Eigen::Index>(seqs.size()), tabular_features(seqs.front(), with_horizon).size());
    for (std::size_t k = 0; k < seqs.size(); ++k) {
        auto row = tabular_features(seqs[k], with_horizon);
        if (row.size() != X.cols()) throw invalid_argument("sequences mix input window lengths");
        X.row(static_cast<Eigen::Index>(k)) = row;
    }
    return X;
}

void trend_params::validate() const {
    if (!(lower < upper)) throw invalid_argument("trend clamp bounds must satisfy lower < upper");
    if (!(min_slope >= 0.0)) throw invalid_argument("trend min_slope must be non-negative");
}

trend_regressor::trend_regressor(trend_params params) : _params(params) { _params.validate(); }

double trend_regressor::extrapolate(std::span<const double> series, int horizon) const {
    if (series.empty()) throw invalid_argument("trend needs at least one value");
    if (horizon < 1) throw invalid_argument("horizon must be at least 1");
    const auto n = static_cast<Eigen::Index>(series.size());
    Eigen::Map<const Eigen::ArrayXd> y(series.data(), n);
    const Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
    const double x_mean = x.mean();
    const double y_mean = y.mean();
    const double sxx = (x - x_mean).square().sum();
    double slope = sxx > 0.0 ? ((x - x_mean) * (y - y_mean)).sum() / sxx : 0.0;
    if (std::abs(slope) < _params.min_slope) slope = 0.0;
    const double value = y_mean + slope * (static_cast<double>(n - 1 + horizon) - x_mean);
    return std::clamp(value, _params.lower, _params.upper);
}

double trend_regressor::predict(const std::vector<label_raster>& frames, int horizon) const {
    if (frames.empty()) throw invalid_argument("trend model needs at least one frame");
    std::vector<double> built;
    for (const auto& f : frames) {
        auto shares = metrics::class_proportions(f);
        if (shares.valid_fraction <= 0.0) throw data_unavailable("frame has no valid pixels");
        built.push_back(shares.built());
    }
    return extrapolate(built, horizon);
}

nlohmann::json trend_regressor::to_json() const {
    return {{"kind", "trend"}, {"lower", _params.lower}, {"upper", _params.upper}, {"min_slope", _params.min_slope}};
}

std::shared_ptr<const active_regressor> active_regressor_from_json(const nlohmann::json& doc) {
    try {
        const auto kind = doc.at("kind").get<std::string>();
        if (kind != "trend") throw invalid_argument("unknown active regressor kind '" + kind + "'");
        if (doc.size() != 4) throw invalid_argument("trend regressor needs kind, lower, upper and min_slope");
        trend_params p;
        p.lower = doc.at("lower").get<double>();
        p.upper = doc.at("upper").get<double>();
        p.min_slope = doc.at("min_slope").get<double>();
        return std::make_shared<trend_regressor>(p);
    } catch (const nlohmann::json::exception& e) {
        throw invalid_argument(std::string("malformed active regressor: ") + e.what());
    }
}

forecast_result xgclm_predict(const xgclm_model& model, const frame_sequence& seq) {
    if (static_cast<int>(seq.input_built.size()) != model.window)
        throw invalid_argument("sequence window does not match the model window");
    forecast_result r;
    if (model.classifier) {
        r.active_probability = model.classifier->predict(tabular_features(seq, false));
        r.routed_active = r.active_probability >= model.route_threshold;
    }
    if (r.routed_active && !seq.frames.empty()) {
        r.value = model.active->predict(seq.frames, seq.horizon);
    } else {
        r.fallback = r.routed_active;
        r.value = static_prediction(model, seq);
    }
    r.value = std::clamp(r.value, 0.0, 1.0);
    return r;
}

xgclm_model xgclm_train(const std::vector<frame_sequence>& train, const std::vector<frame_sequence>& val,
                        const xgclm_options& options) {
    if (train.empty()) throw invalid_argument("no training sequences");
    if (!(options.wmse_weight >= 0.0)) throw invalid_argument("wmse weight must be non-negative");
    const int window = static_cast<int>(train.front().input_built.size());
    check_window(train, window);
    check_window(val, window);
    std::set<std::int64_t> train_tiles;
    for (const auto& s : train) train_tiles.insert(s.tile_id);
    for (const auto& s : val)
        if (train_tiles.count(s.tile_id))
            throw invalid_argument("tile " + std::to_string(s.tile_id) + " is in both training and validation sets");

    auto active = select(train, options.tau, activity_label::active);
    auto stable = select(train, options.tau, activity_label::stable);

    xgclm_model m;
    m.window = window;
    m.active = std::make_shared<trend_regressor>(options.trend);
    if (active.empty() || stable.empty()) {
        m.single_branch = true;
        m.static_regressor = gbt_train(feature_matrix(train, true), targets(train), options.regressor);
        return m;
    }

    gbt_params cp = options.classifier;
    cp.loss = loss_kind::logistic;
    m.classifier = gbt_train(feature_matrix(train, false), activity_flags(train, options.tau), cp);
    gbt_params rp = options.regressor;
    rp.loss = loss_kind::squared;
    m.static_regressor = gbt_train(feature_matrix(stable, true), targets(stable), rp);

    if (val.empty()) return m;
    const auto n = static_cast<Eigen::Index>(val.size());
    Eigen::VectorXd prob(n), by_static(n), by_active(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& s = val[static_cast<std::size_t>(k)];
        prob(k) = m.classifier->predict(tabular_features(s, false));
        by_static(k) = std::clamp(static_prediction(m, s), 0.0, 1.0);
        by_active(k) = s.frames.empty() ? by_static(k) : std::clamp(m.active->predict(s.frames, s.horizon), 0.0, 1.0);
    }
    const Eigen::VectorXd y = targets(val);
    const Eigen::VectorXd alpha = activity_flags(val, options.tau);
    double best = std::numeric_limits<double>::infinity();
    for (int step = 1; step <= 9; ++step) {
        const double threshold = step / 10.0;
        const Eigen::VectorXd y_hat = (prob.array() >= threshold).select(by_active, by_static);
        const double score = wmse(y, y_hat, alpha, options.wmse_weight);
        if (score < best) {
            best = score;
            m.route_threshold = threshold;
        }
    }
    return m;
}

xgclm_model static_only_train(const std::vector<frame_sequence>& train, const xgclm_options& options) {
    if (train.empty()) throw invalid_argument("no training sequences");
    const int window = static_cast<int>(train.front().input_built.size());
    check_window(train, window);
    xgclm_model m;
    m.window = window;
    gbt_params rp = options.regressor;
    rp.loss = loss_kind::squared;
    m.static_regressor = gbt_train(feature_matrix(train, true), targets(train), rp);
    return m;
}

nlohmann::json to_json(const xgclm_model& model) {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["classifier"] = model.classifier ? to_json(*model.classifier) : nlohmann::json(nullptr);
    doc["static_regressor"] = to_json(model.static_regressor);
    doc["active_regressor"] = model.active->to_json();
    doc["route_threshold"] = model.route_threshold;
    doc["window"] = model.window;
    doc["single_branch"] = model.single_branch;
    return doc;
}

xgclm_model xgclm_from_json(const nlohmann::json& doc) {
    static const std::set<std::string> keys{"version",         "classifier", "static_regressor", "active_regressor",
                                            "route_threshold", "window",     "single_branch"};
    try {
        if (!doc.is_object()) throw invalid_argument("model document must be an object");
        for (const auto& [k, v] : doc.items())
            if (!keys.count(k)) throw invalid_argument("unknown model key '" + k + "'");
        if (doc.at("version").get<int>() != 1) throw invalid_argument("unsupported model version");
        xgclm_model m;
        if (!doc.at("classifier").is_null()) {
            m.classifier = gbt_from_json(doc.at("classifier"));
            if (m.classifier->loss != loss_kind::logistic) throw invalid_argument("classifier must use logistic loss");
        }
        m.static_regressor = gbt_from_json(doc.at("static_regressor"));
        if (m.static_regressor.loss != loss_kind::squared)
            throw invalid_argument("static regressor must use squared loss");
        m.active = active_regressor_from_json(doc.at("active_regressor"));
        m.route_threshold = doc.at("route_threshold").get<double>();
        if (!(m.route_threshold >= 0.0 && m.route_threshold <= 1.0))
            throw invalid_argument("route_threshold must lie in [0, 1]");
        m.window = doc.at("window").get<int>();
        if (m.window < 1) throw invalid_argument("window must be at least 1");
        m.single_branch = doc.at("single_branch").get<bool>();
        if (m.static_regressor.num_features != 2 * m.window + 1)
            throw invalid_argument("static regressor feature count does not match the window");
        if (m.classifier && m.classifier->num_features != 2 * m.window)
            throw invalid_argument("classifier feature count does not match the window");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_argument(std::string("malformed model: ") + e.what());
    }
}

void write_model(const xgclm_model& model, const std::filesystem::path& path) {
    fishnet::detail::write_text(path, to_json(model).dump(1) + "\n");
}

xgclm_model read_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open model file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw invalid_argument("model file " + path.string() + " is not valid JSON: " + e.what());
    }
    return xgclm_from_json(doc);
}

void split_fractions::validate() const {
    if (!(train > 0.0 && val >= 0.0 && train + val < 1.0))
        throw invalid_argument("split fractions need train > 0, val >= 0 and train + val < 1");
}

split_part assign_split(const geo::fishnet_grid& grid, std::int64_t tile_id, const split_fractions& f) {
    f.validate();
    if (tile_id < 0 || tile_id >= grid.num_tiles()) throw invalid_argument("tile id out of range");
    const auto rows = static_cast<double>(grid.num_tiles_y());
    const auto j = tile_id / grid.num_tiles_x();
    if (j < static_cast<std::int64_t>(std::llround(f.train * rows))) return split_part::train;
    if (j < static_cast<std::int64_t>(std::llround((f.train + f.val) * rows))) return split_part::val;
    return split_part::test;
}

eval_report evaluate(const xgclm_model& model, const std::vector<frame_sequence>& test,
                     const std::vector<int>& horizons, double tau, double wmse_weight) {
    if (horizons.empty()) throw invalid_argument("no horizons to evaluate");
    eval_report report;
    for (int h : horizons) {
        std::vector<const frame_sequence*> seqs;
        for (const auto& s : test)
            if (s.horizon == h) seqs.push_back(&s);
        if (seqs.empty()) throw invalid_argument("empty test set at horizon " + std::to_string(h));

        const auto n = static_cast<Eigen::Index>(seqs.size());
        Eigen::VectorXd y(n), y_hat(n), alpha(n);
        std::int64_t routed_active = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto& s = *seqs[static_cast<std::size_t>(k)];
            auto r = xgclm_predict(model, s);
            routed_active += r.routed_active && !r.fallback;
            y(k) = s.target_value;
            y_hat(k) = r.value;
            alpha(k) = label_activity(s, tau) == activity_label::active ? 1.0 : 0.0;
        }
        report.routed_active_static.emplace_back(routed_active, n - routed_active);
        report.rows.push_back(score_group(h, "all", y, y_hat, alpha, wmse_weight));

        for (double flag : {1.0, 0.0}) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index k = 0; k < n; ++k)
                if (alpha(k) == flag) idx.push_back(k);
            const auto m = static_cast<Eigen::Index>(idx.size());
            Eigen::VectorXd ys(m), ps(m), as(m);
            for (Eigen::Index k = 0; k < m; ++k) {
                ys(k) = y(idx[static_cast<std::size_t>(k)]);
                ps(k) = y_hat(idx[static_cast<std::size_t>(k)]);
                as(k) = flag;
            }
            report.rows.push_back(score_group(h, flag == 1.0 ? "active" : "static", ys, ps, as, wmse_weight));
        }
    }
    return report;
}

void write_eval_csv(const eval_report& report, const std::filesystem::path& path) {
    std::string out(eval_csv_header);
    out += '\n';
    for (const auto& r : report.rows) {
        out += std::to_string(r.horizon) + ',' + r.branch + ',' + std::to_string(r.n_tiles) + ',' +
               fishnet::detail::format_double(r.mse) + ',' + fishnet::detail::format_double(r.wmse) + ',' +
               fishnet::detail::format_double(r.r2) + '\n';
    }
    fishnet::detail::write_text(path, out);
}

std::vector<eval_row> read_eval_csv(const std::filesystem::path& path) {
    auto lines = fishnet::detail::read_lines(path);
    if (lines.empty() || lines[0] != eval_csv_header) throw parse_error("unexpected evaluation header", 1);
    std::vector<eval_row> rows;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        if (lines[k].empty()) continue;
        auto f = fishnet::detail::split_csv(lines[k]);
        if (f.size() != 6) throw parse_error("expected 6 fields", k + 1);
        eval_row r;
        r.horizon = static_cast<int>(fishnet::detail::parse_int(f[0], k + 1));
        r.branch = std::string(f[1]);
        if (r.branch != "all" && r.branch != "active" && r.branch != "static")
            throw parse_error("unknown branch '" + r.branch + "'", k + 1);
        r.n_tiles = fishnet::detail::parse_int(f[2], k + 1);
        r.mse = fishnet::detail::parse_double(f[3], k + 1);
        r.wmse = fishnet::detail::parse_double(f[4], k + 1);
        r.r2 = fishnet::detail::parse_double(f[5], k + 1);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace fishnet::forecast
