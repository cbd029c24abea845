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
#include <utility>
#include <vector>

#include "fishnet/calendar.hpp"
#include "fishnet/raster.hpp"

namespace fishnet::composite {

/// Per-pixel temporal reduction. mean is probability-only, mode is label-only.
enum class aggregation_op { mean, median, min, max, mode };

aggregation_op parse_aggregation(std::string_view name);
std::string_view to_string(aggregation_op op);

/// Throws invalid_argument when op cannot be applied to samples of this type.
template <typename Scalar>
void check_compatible(aggregation_op op);

struct composite_report {
    std::int64_t batch_id = -1;
    int year = 0;
    std::int64_t pixels_total = 0;
    std::int64_t missing_before = 0;
    std::int64_t missing_after = 0;
    std::int64_t imputed_count = 0;
    bool fallback_only = false;  // no seasonal images; the fallback composite was used wholesale

    friend bool operator==(const composite_report&, const composite_report&) = default;
};

/// Items whose timestamp falls in the window; order is preserved.
template <typename Scalar>
image_collection<Scalar> filter_season(const image_collection<Scalar>& c, const seasonal_window& w);

/**
 * Reduces a non-empty homogeneous collection pixel by pixel and band by band over
 * valid samples only. A sample is nodata iff every input is nodata there.
 * Even-count medians take the lower middle for labels and the midpoint for
 * probabilities; mode ties go to the lowest class.
 */
template <typename Scalar>
raster<Scalar> aggregate(const image_collection<Scalar>& c, aggregation_op op);

/// Fills nodata samples of `target` from `fallback`; valid samples are copied bit for bit.
template <typename Scalar>
std::pair<raster<Scalar>, composite_report> impute(const raster<Scalar>& target,
                                                   const raster<Scalar>& fallback);

/// Seasonal composite with gaps filled from the composite of the whole year.
template <typename Scalar>
std::pair<raster<Scalar>, composite_report> correct_year(const image_collection<Scalar>& seasonal,
                                                         const image_collection<Scalar>& annual,
                                                         aggregation_op op,
                                                         const seasonal_window& w);

inline constexpr std::string_view report_csv_header =
    "batch_id,year,pixels_total,missing_before,missing_after,imputed_count,fallback_only";

/// Reports are written sorted by (batch_id, year).
void write_reports_csv(std::vector<composite_report> reports, const std::filesystem::path& path);
std::vector<composite_report> read_reports_csv(const std::filesystem::path& path);

}  // namespace fishnet::composite
