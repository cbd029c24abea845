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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fishnet/gbt.hpp"
#include "fishnet/geo.hpp"
#include "fishnet/metrics.hpp"
#include "fishnet/raster.hpp"
#include "json.hpp"

namespace fishnet::forecast {

using metrics::frame_sequence;

/// Whether a tile is urbanizing over a window ("active") or not ("stable").
enum class activity_label : std::uint8_t { stable = 0, active = 1 };

/// Active iff the last value exceeds the first by at least tau.
activity_label label_activity(std::span<const double> built, double tau);
/// Labels a sequence by its input window.
activity_label label_activity(const frame_sequence& seq, double tau);

/**
 * One label per tile of the table over the given years, ordered by tile id.
 * Throws data_unavailable when a tile lacks any of the years.
 */
std::vector<std::pair<std::int64_t, activity_label>> label_activity(const metrics::tile_metrics_table& table,
                                                                    const std::vector<int>& window_years,
                                                                    double tau);

/**
 * Tabular features of a sequence: the N input built shares, the N-1 year over
 * year deltas, the forward-fill indicator and optionally the horizon.
 */
Eigen::RowVectorXd tabular_features(const frame_sequence& seq, bool with_horizon);
Eigen::MatrixXd feature_matrix(const std::vector<frame_sequence>& seqs, bool with_horizon);

/// Frames-to-scalar model used for tiles routed to the active branch.
class active_regressor {
   public:
    virtual ~active_regressor() = default;
    /// Built share forecast `horizon` years after the last frame.
    virtual double predict(const std::vector<label_raster>& frames, int horizon) const = 0;
    virtual nlohmann::json to_json() const = 0;
};

struct trend_params {
    double lower = 0.0;
    double upper = 1.0;
    /// Fitted slopes with smaller magnitude are treated as zero.
    double min_slope = 0.0;

    void validate() const;
    friend bool operator==(const trend_params&, const trend_params&) = default;
};

/// Least-squares line through the built shares of the frames, extrapolated and clamped.
class trend_regressor : public active_regressor {
   public:
    explicit trend_regressor(trend_params params = {});

    double predict(const std::vector<label_raster>& frames, int horizon) const override;
    nlohmann::json to_json() const override;
    const trend_params& params() const { return _params; }

    /// The same model applied to an already extracted built-share series.
    double extrapolate(std::span<const double> series, int horizon) const;

   private:
    trend_params _params;
};

/// Throws invalid_argument for unknown kinds.
std::shared_ptr<const active_regressor> active_regressor_from_json(const nlohmann::json& doc);

struct xgclm_model {
    /// Absent for single-branch and static-only models; every tile then takes the static branch.
    std::optional<gbt_model> classifier;
    gbt_model static_regressor;
    std::shared_ptr<const active_regressor> active = std::make_shared<trend_regressor>();
    double route_threshold = 0.5;
    int window = 4;
    /// Set when one training stratum was empty and the model was reduced to the static branch.
    bool single_branch = false;
};

struct forecast_result {
    double value = 0.0;
    double active_probability = 0.0;
    bool routed_active = false;
    /// Routed to the active branch but without frames, so the static branch answered.
    bool fallback = false;
};

forecast_result xgclm_predict(const xgclm_model& model, const frame_sequence& seq);

struct xgclm_options {
    gbt_params classifier{.loss = loss_kind::logistic};
    gbt_params regressor{};
    trend_params trend{};
    double tau = 0.01;
    double wmse_weight = 100.0;
};

/**
 * Trains the classifier on all training sequences, the static regressor on the
 * stable ones and picks the route threshold in {0.1, ..., 0.9} with the lowest
 * validation WMSE (lowest threshold on ties). Validation sequences need frames
 * for the active branch to be scored. Train and validation tiles must be disjoint.
 */
xgclm_model xgclm_train(const std::vector<frame_sequence>& train, const std::vector<frame_sequence>& val,
                        const xgclm_options& options);

/// Single regressor on all training sequences with no routing.
xgclm_model static_only_train(const std::vector<frame_sequence>& train, const xgclm_options& options);

nlohmann::json to_json(const xgclm_model& model);
xgclm_model xgclm_from_json(const nlohmann::json& doc);
void write_model(const xgclm_model& model, const std::filesystem::path& path);
xgclm_model read_model(const std::filesystem::path& path);

/// Contiguous bands of fishnet rows, north to south: train, then validation, then test.
enum class split_part { train, val, test };

struct split_fractions {
    double train = 0.6;
    double val = 0.2;

    void validate() const;
};

split_part assign_split(const geo::fishnet_grid& grid, std::int64_t tile_id, const split_fractions& f);

/// Metrics of one horizon over one group of tiles; NaN where undefined.
struct eval_row {
    int horizon = 0;
    std::string branch;  // "all", "active" or "static", by activity over the input window
    std::int64_t n_tiles = 0;
    double mse = 0.0;
    double wmse = 0.0;
    double r2 = 0.0;
};

struct eval_report {
    std::vector<eval_row> rows;
    /// Per horizon, how many tiles each branch scored; the two sum to the tile count.
    std::vector<std::pair<std::int64_t, std::int64_t>> routed_active_static;
};

/**
 * Scores the model on the test sequences of each horizon. Throws
 * invalid_argument when there are no test sequences for a horizon.
 */
eval_report evaluate(const xgclm_model& model, const std::vector<frame_sequence>& test,
                     const std::vector<int>& horizons, double tau, double wmse_weight);

inline constexpr std::string_view eval_csv_header = "horizon,branch,n_tiles,mse,wmse,r2";

void write_eval_csv(const eval_report& report, const std::filesystem::path& path);
std::vector<eval_row> read_eval_csv(const std::filesystem::path& path);

}  // namespace fishnet::forecast
