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

#include "fishnet/synth.hpp"

#include <algorithm>
#include <cmath>

namespace fishnet {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix(a ^ splitmix(b)); }

class rng {
   public:
    explicit rng(std::uint64_t seed) : _state(seed) {}
    std::uint64_t next() { return splitmix(_state++); }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::int64_t below(std::int64_t n) { return static_cast<std::int64_t>(uniform() * static_cast<double>(n)); }

   private:
    std::uint64_t _state;
};

struct disk {
    double cx, cy, radius;
};

constexpr std::uint64_t tag_background = 1;
constexpr std::uint64_t tag_cores = 2;
constexpr std::uint64_t tag_kernels = 3;
constexpr std::uint64_t tag_image = 4;
constexpr std::uint64_t tag_probs = 5;
constexpr std::uint64_t tag_infill = 6;

// background palette: (class, cumulative weight)
constexpr std::pair<land_class, double> palette[] = {
    {land_class::water, 0.08},  {land_class::trees, 0.38},           {land_class::grass, 0.58},
    {land_class::crops, 0.83},  {land_class::shrub_and_scrub, 0.95}, {land_class::bare, 1.00},
};

template <typename Fn>
void for_each_in_disk(const disk& d, std::int64_t width, std::int64_t height, Fn&& fn) {
    auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(d.cx - d.radius)));
    auto x1 = std::min<std::int64_t>(width - 1, static_cast<std::int64_t>(std::ceil(d.cx + d.radius)));
    auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(d.cy - d.radius)));
    auto y1 = std::min<std::int64_t>(height - 1, static_cast<std::int64_t>(std::ceil(d.cy + d.radius)));
    const double r2 = d.radius * d.radius;
    for (auto y = y0; y <= y1; ++y) {
        for (auto x = x0; x <= x1; ++x) {
            double dx = static_cast<double>(x) + 0.5 - d.cx;
            double dy = static_cast<double>(y) + 0.5 - d.cy;
            if (dx * dx + dy * dy < r2 && !fn(x, y)) return;
        }
    }
}

std::vector<disk> static_cores(const scene_spec& spec) {
    rng r(mix(spec.seed, tag_cores));
    std::vector<disk> out;
    for (int k = 0; k < spec.static_cores; ++k) {
        double cx = r.uniform(0.0, static_cast<double>(spec.width));
        double cy = r.uniform(0.0, static_cast<double>(spec.height));
        out.push_back({cx, cy, r.uniform(0.25, 1.0) * spec.static_core_radius_max});
    }
    return out;
}

struct infill_zone {
    disk area;
    double filled;  // share of the zone built in the given year
    std::uint64_t key;
};

std::vector<infill_zone> infill_zones(const scene_spec& spec, int year) {
    rng r(mix(spec.seed, tag_infill));
    const double elapsed = static_cast<double>(year - spec.years.front());
    std::vector<infill_zone> out;
    for (int k = 0; k < spec.urban_seeds; ++k) {
        double cx = r.uniform(0.0, static_cast<double>(spec.width));
        double cy = r.uniform(0.0, static_cast<double>(spec.height));
        double radius = r.uniform(spec.initial_radius_min, spec.initial_radius_max);
        double start = r.uniform(0.0, 0.3);
        double rate = r.uniform(0.5, 1.5) * spec.infill_rate;
        out.push_back({{cx, cy, radius}, std::min(1.0, start + rate * std::max(0.0, elapsed)), r.next()});
    }
    return out;
}

std::vector<disk> growth_kernels(const scene_spec& spec, int year) {
    rng r(mix(spec.seed, tag_kernels));
    const double elapsed = static_cast<double>(year - spec.years.front());
    std::vector<disk> out;
    for (int k = 0; k < spec.urban_seeds; ++k) {
        double cx = r.uniform(0.0, static_cast<double>(spec.width));
        double cy = r.uniform(0.0, static_cast<double>(spec.height));
        double r0 = r.uniform(spec.initial_radius_min, spec.initial_radius_max);
        out.push_back({cx, cy, r0 + spec.growth_rate * std::max(0.0, elapsed)});
    }
    return out;
}

prob_raster to_probabilities(const label_raster& labels, std::uint64_t seed) {
    prob_raster out(labels.width(), labels.height(), num_classes, labels.transform());
    const std::int64_t n = labels.pixels();
    rng r(seed);
    float* dst = out.data().data();
    for (std::int64_t k = 0; k < n; ++k) {
        std::uint8_t c = labels.data()[k];
        if (is_nodata(c)) continue;  // every band stays NaN
        double top = r.uniform(0.55, 0.95);
        double weights[num_classes];
        double total = 0.0;
        for (int b = 0; b < num_classes; ++b) {
            weights[b] = b == c ? 0.0 : r.uniform();
            total += weights[b];
        }
        for (int b = 0; b < num_classes; ++b) {
            double p = b == c ? top : (1.0 - top) * weights[b] / total;
            dst[b * n + k] = static_cast<float>(p);
        }
    }
    return out;
}

}  // namespace

growth_mode parse_growth_mode(std::string_view name) {
    if (name == "front") return growth_mode::front;
    if (name == "infill") return growth_mode::infill;
    throw invalid_argument("unknown growth mode '" + std::string(name) + "'");
}

void scene_spec::validate() const {
    if (width <= 0 || height <= 0) throw invalid_argument("scene dimensions must be positive");
    if (years.empty()) throw invalid_argument("scene needs at least one year");
    if (!std::is_sorted(years.begin(), years.end()) ||
        std::adjacent_find(years.begin(), years.end()) != years.end())
        throw invalid_argument("scene years must be strictly increasing");
    if (urban_seeds < 0 || static_cores < 0) throw invalid_argument("negative kernel count");
    if (!(growth_rate >= 0.0)) throw invalid_argument("growth rate must be non-negative");
    if (!(infill_rate >= 0.0 && infill_rate <= 1.0)) throw invalid_argument("infill rate must be in [0, 1]");
    if (!(initial_radius_min >= 0.0) || !(initial_radius_max >= initial_radius_min))
        throw invalid_argument("initial radius range is invalid");
    for (double f : {cloud_gap_fraction, label_noise})
        if (!(f >= 0.0 && f <= 1.0)) throw invalid_argument("scene fractions must be in [0, 1]");
    if (!(cloud_radius > 0.0)) throw invalid_argument("cloud radius must be positive");
    if (months.empty()) throw invalid_argument("scene needs at least one month per year");
    for (int m : months)
        if (m < 1 || m > 12) throw invalid_argument("month out of range");
    if (patch_size <= 0) throw invalid_argument("patch size must be positive");
}

label_raster synth_truth(const scene_spec& spec, int year) {
    spec.validate();
    label_raster out(spec.width, spec.height, 1, spec.transform);
    auto plane = out.band(0);

    const std::int64_t px = spec.patch_size;
    const std::int64_t patches_x = (spec.width + px - 1) / px;
    for (std::int64_t y = 0; y < spec.height; ++y) {
        for (std::int64_t x = 0; x < spec.width; ++x) {
            std::uint64_t cell = static_cast<std::uint64_t>((y / px) * patches_x + x / px);
            double u = static_cast<double>(mix(mix(spec.seed, tag_background), cell) >> 11) * 0x1.0p-53;
            land_class c = palette[0].first;
            for (const auto& [cls, cum] : palette) {
                c = cls;
                if (u < cum) break;
            }
            plane(y, x) = class_index(c);
        }
    }
    const auto built = class_index(land_class::built);
    auto paint = [&](std::int64_t x, std::int64_t y) {
        plane(y, x) = built;
        return true;
    };
    for (const auto& d : static_cores(spec)) for_each_in_disk(d, spec.width, spec.height, paint);
    if (spec.growth == growth_mode::front) {
        for (const auto& d : growth_kernels(spec, year)) for_each_in_disk(d, spec.width, spec.height, paint);
    } else {
        // a pixel's conversion year is fixed by its hash, so built pixels stay built
        for (const auto& z : infill_zones(spec, year)) {
            for_each_in_disk(z.area, spec.width, spec.height, [&](std::int64_t x, std::int64_t y) {
                auto h = mix(z.key, static_cast<std::uint64_t>(y * spec.width + x));
                if (static_cast<double>(h >> 11) * 0x1.0p-53 < z.filled) plane(y, x) = built;
                return true;
            });
        }
    }
    return out;
}

scene_year synth_year(const scene_spec& spec, int year) {
    const auto truth = synth_truth(spec, year);
    scene_year result;
    result.year = year;
    const std::int64_t n = truth.pixels();

    for (std::size_t m = 0; m < spec.months.size(); ++m) {
        const int month = spec.months[m];
        rng r(mix(mix(spec.seed, tag_image), static_cast<std::uint64_t>(year) * 16 + m));
        label_raster img = truth;
        auto& data = img.data();

        if (spec.snow_months && (month == 12 || month <= 2)) {
            data.setConstant(class_index(land_class::snow_and_ice));
        } else {
            auto flips = static_cast<std::int64_t>(std::llround(spec.label_noise * static_cast<double>(n)));
            for (std::int64_t k = 0; k < flips; ++k)
                data[r.below(n)] = static_cast<std::uint8_t>(r.below(8));
        }

        auto target = static_cast<std::int64_t>(std::llround(spec.cloud_gap_fraction * static_cast<double>(n)));
        std::int64_t missing = 0;
        auto plane = img.band(0);
        while (missing < target) {
            disk d{r.uniform(0.0, static_cast<double>(spec.width)),
                   r.uniform(0.0, static_cast<double>(spec.height)),
                   r.uniform(0.5, 1.5) * spec.cloud_radius};
            for_each_in_disk(d, spec.width, spec.height, [&](std::int64_t x, std::int64_t y) {
                if (!is_nodata(plane(y, x))) {
                    plane(y, x) = label_raster::nodata();
                    ++missing;
                }
                return missing < target;
            });
        }

        date ts{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                std::chrono::day{15}};
        if (spec.probabilities) {
            auto seed = mix(mix(spec.seed, tag_probs), static_cast<std::uint64_t>(year) * 16 + m);
            result.probabilities.push_back({ts, to_probabilities(img, seed)});
        } else {
            result.labels.push_back({ts, std::move(img)});
        }
    }
    return result;
}

std::vector<scene_year> synth_scene(const scene_spec& spec) {
    spec.validate();
    std::vector<scene_year> out;
    out.reserve(spec.years.size());
    for (int y : spec.years) out.push_back(synth_year(spec, y));
    return out;
}

}  // namespace fishnet
