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

#include "fishnet/composite.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <tuple>

#include "fishnet/detail/text.hpp"
#include "fishnet/error.hpp"

namespace fishnet::composite {

namespace {

template <typename Scalar>
void check_homogeneous(const image_collection<Scalar>& c) {
    const auto& first = c.front().image;
    for (const auto& item : c)
        if (!item.image.same_shape(first))
            throw invalid_argument("image collection mixes raster shapes, bands or georeferencing");
}

// Neumaier-compensated sum of doubles.
struct compensated_sum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) carry += (sum - t) + v;
        else carry += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

template <typename Scalar>
Scalar reduce(std::vector<Scalar>& values, aggregation_op op) {
    switch (op) {
        case aggregation_op::min:
            return *std::min_element(values.begin(), values.end());
        case aggregation_op::max:
            return *std::max_element(values.begin(), values.end());
        case aggregation_op::mean: {
            compensated_sum s;
            for (Scalar v : values) s.add(static_cast<double>(v));
            return static_cast<Scalar>(s.value() / static_cast<double>(values.size()));
        }
        case aggregation_op::median: {
            std::sort(values.begin(), values.end());
            const std::size_t n = values.size();
            if (n % 2 == 1) return values[n / 2];
            if constexpr (std::is_floating_point_v<Scalar>) {
                return static_cast<Scalar>(0.5 * (static_cast<double>(values[n / 2 - 1]) +
                                                  static_cast<double>(values[n / 2])));
            } else {
                return values[n / 2 - 1];
            }
        }
        case aggregation_op::mode: {
            // longest run in sorted order; the first one found is the lowest class on ties
            std::sort(values.begin(), values.end());
            Scalar best = values.front();
            std::size_t best_run = 0;
            for (std::size_t a = 0; a < values.size();) {
                std::size_t b = a;
                while (b < values.size() && values[b] == values[a]) ++b;
                if (b - a > best_run) {
                    best_run = b - a;
                    best = values[a];
                }
                a = b;
            }
            return best;
        }
    }
    throw invalid_argument("unknown aggregation op");
}

}  // namespace

aggregation_op parse_aggregation(std::string_view name) {
    if (name == "mean") return aggregation_op::mean;
    if (name == "median") return aggregation_op::median;
    if (name == "min") return aggregation_op::min;
    if (name == "max") return aggregation_op::max;
    if (name == "mode") return aggregation_op::mode;
    throw invalid_argument("unknown aggregation op '" + std::string(name) + "'");
}

std::string_view to_string(aggregation_op op) {
    switch (op) {
        case aggregation_op::mean: return "mean";
        case aggregation_op::median: return "median";
        case aggregation_op::min: return "min";
        case aggregation_op::max: return "max";
        case aggregation_op::mode: return "mode";
    }
    return "?";
}

template <typename Scalar>
void check_compatible(aggregation_op op) {
    if constexpr (std::is_floating_point_v<Scalar>) {
        if (op == aggregation_op::mode)
            throw invalid_argument("mode aggregation applies to label rasters only");
    } else {
        if (op == aggregation_op::mean)
            throw invalid_argument("mean aggregation applies to probability rasters only");
    }
}

template <typename Scalar>
image_collection<Scalar> filter_season(const image_collection<Scalar>& c, const seasonal_window& w) {
    w.validate();
    image_collection<Scalar> out;
    for (const auto& item : c)
        if (w.contains(item.timestamp)) out.push_back(item);
    return out;
}

template <typename Scalar>
raster<Scalar> aggregate(const image_collection<Scalar>& c, aggregation_op op) {
    if (c.empty()) throw invalid_argument("cannot aggregate an empty image collection");
    check_homogeneous(c);
    check_compatible<Scalar>(op);

    const auto& first = c.front().image;
    raster<Scalar> out(first.width(), first.height(), first.bands(), first.transform());
    const std::int64_t samples = first.data().size();
    std::vector<const Scalar*> sources;
    for (const auto& item : c) sources.push_back(item.image.data().data());

    std::vector<Scalar> values;
    values.reserve(c.size());
    Scalar* dst = out.data().data();
    for (std::int64_t k = 0; k < samples; ++k) {
        values.clear();
        for (const Scalar* src : sources)
            if (!is_nodata(src[k])) values.push_back(src[k]);
        dst[k] = values.empty() ? raster<Scalar>::nodata() : reduce(values, op);
    }
    return out;
}

template <typename Scalar>
std::pair<raster<Scalar>, composite_report> impute(const raster<Scalar>& target,
                                                   const raster<Scalar>& fallback) {
    if (!target.same_shape(fallback))
        throw invalid_argument("impute: target and fallback differ in shape or georeferencing");
    composite_report report;
    report.pixels_total = target.pixels();
    report.missing_before = count_missing_pixels(target);

    raster<Scalar> out = target;
    Scalar* dst = out.data().data();
    const Scalar* fb = fallback.data().data();
    const std::int64_t samples = out.data().size();
    for (std::int64_t k = 0; k < samples; ++k)
        if (is_nodata(dst[k])) dst[k] = fb[k];

    report.missing_after = count_missing_pixels(out);
    report.imputed_count = report.missing_before - report.missing_after;
    return {std::move(out), report};
}

template <typename Scalar>
std::pair<raster<Scalar>, composite_report> correct_year(const image_collection<Scalar>& seasonal,
                                                         const image_collection<Scalar>& annual,
                                                         aggregation_op op,
                                                         const seasonal_window& w) {
    auto in_season = filter_season(seasonal, w);
    if (in_season.empty() && annual.empty())
        throw data_unavailable("no seasonal or annual images to build a composite from");

    if (in_season.empty()) {
        auto comp = aggregate(annual, op);
        composite_report report;
        report.pixels_total = comp.pixels();
        report.missing_before = comp.pixels();
        report.missing_after = count_missing_pixels(comp);
        report.imputed_count = report.missing_before - report.missing_after;
        report.fallback_only = true;
        return {std::move(comp), report};
    }

    auto comp = aggregate(in_season, op);
    if (annual.empty()) {
        composite_report report;
        report.pixels_total = comp.pixels();
        report.missing_before = report.missing_after = count_missing_pixels(comp);
        return {std::move(comp), report};
    }
    return impute(comp, aggregate(annual, op));
}

#define FISHNET_INSTANTIATE(T)                                                                    \
    template void check_compatible<T>(aggregation_op);                                            \
    template image_collection<T> filter_season<T>(const image_collection<T>&,                     \
                                                  const seasonal_window&);                        \
    template raster<T> aggregate<T>(const image_collection<T>&, aggregation_op);                  \
    template std::pair<raster<T>, composite_report> impute<T>(const raster<T>&, const raster<T>&); \
    template std::pair<raster<T>, composite_report> correct_year<T>(                              \
        const image_collection<T>&, const image_collection<T>&, aggregation_op,                   \
        const seasonal_window&);

FISHNET_INSTANTIATE(std::uint8_t)
FISHNET_INSTANTIATE(float)
#undef FISHNET_INSTANTIATE

void write_reports_csv(std::vector<composite_report> reports, const std::filesystem::path& path) {
    std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
        return std::tie(a.batch_id, a.year) < std::tie(b.batch_id, b.year);
    });
    std::ostringstream out;
    out << report_csv_header << '\n';
    for (const auto& r : reports)
        out << r.batch_id << ',' << r.year << ',' << r.pixels_total << ',' << r.missing_before << ','
            << r.missing_after << ',' << r.imputed_count << ',' << (r.fallback_only ? 1 : 0) << '\n';
    detail::write_text(path, out.str());
}

std::vector<composite_report> read_reports_csv(const std::filesystem::path& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || lines[0] != report_csv_header)
        throw parse_error("unexpected composite report header", 1);
    std::vector<composite_report> out;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        if (lines[k].empty()) continue;
        auto f = detail::split_csv(lines[k]);
        if (f.size() != 7) throw parse_error("expected 7 fields", k + 1);
        composite_report r;
        r.batch_id = detail::parse_int(f[0], k + 1);
        r.year = static_cast<int>(detail::parse_int(f[1], k + 1));
        r.pixels_total = detail::parse_int(f[2], k + 1);
        r.missing_before = detail::parse_int(f[3], k + 1);
        r.missing_after = detail::parse_int(f[4], k + 1);
        r.imputed_count = detail::parse_int(f[5], k + 1);
        r.fallback_only = detail::parse_int(f[6], k + 1) != 0;
        out.push_back(r);
    }
    return out;
}

}  // namespace fishnet::composite
