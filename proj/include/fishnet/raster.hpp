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

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <optional>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "fishnet/calendar.hpp"
#include "fishnet/error.hpp"

namespace fishnet {

/// Dynamic World classes in band order.
enum class land_class : std::uint8_t {
    water = 0,
    trees = 1,
    grass = 2,
    flooded_vegetation = 3,
    crops = 4,
    shrub_and_scrub = 5,
    built = 6,
    bare = 7,
    snow_and_ice = 8,
};

inline constexpr int num_classes = 9;

inline constexpr std::array<std::string_view, num_classes> class_names = {
    "water", "trees", "grass", "flooded_vegetation", "crops",
    "shrub_and_scrub", "built", "bare", "snow_and_ice"};

inline constexpr std::uint8_t class_index(land_class c) { return static_cast<std::uint8_t>(c); }
std::string_view class_name(int index);
/// Throws invalid_argument for unknown names.
int class_from_name(std::string_view name);

/// Missing-pixel sentinel and test per sample type.
template <typename Scalar>
struct nodata_traits;

template <>
struct nodata_traits<std::uint8_t> {
    static constexpr std::uint8_t value() { return 255; }
    static constexpr bool is_nodata(std::uint8_t v) { return v == 255; }
    static constexpr std::uint8_t dtype_code = 0;
};

template <>
struct nodata_traits<float> {
    static constexpr float value() { return std::numeric_limits<float>::quiet_NaN(); }
    static bool is_nodata(float v) { return std::isnan(v); }
    static constexpr std::uint8_t dtype_code = 1;
};

template <typename Scalar>
inline bool is_nodata(Scalar v) {
    return nodata_traits<Scalar>::is_nodata(v);
}

/// GDAL-ordered affine transform: x = gt[0] + col*gt[1] + row*gt[2], y = gt[3] + col*gt[4] + row*gt[5].
using geotransform = std::array<double, 6>;

struct pixel_window {
    std::int64_t x0 = 0;
    std::int64_t y0 = 0;
    std::int64_t width = 0;
    std::int64_t height = 0;

    friend bool operator==(const pixel_window&, const pixel_window&) = default;
};

/**
 * Georeferenced multi-band raster. Samples are stored band-major, row-major in a
 * single contiguous Eigen array; band(b) exposes one band as a row-major
 * height x width map so block expressions work directly on it.
 */
template <typename Scalar>
class raster {
   public:
    using scalar_type = Scalar;
    using plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using plane_map = Eigen::Map<plane>;
    using const_plane_map = Eigen::Map<const plane>;

    raster() = default;
    raster(std::int64_t width, std::int64_t height, int bands, const geotransform& gt = identity())
        : _width(width), _height(height), _bands(bands), _gt(gt) {
        if (width <= 0 || height <= 0 || bands <= 0)
            throw invalid_argument("raster dimensions must be positive");
        _data.setConstant(width * height * bands, nodata_traits<Scalar>::value());
    }

    static geotransform identity() { return {0.0, 1.0, 0.0, 0.0, 0.0, -1.0}; }
    static Scalar nodata() { return nodata_traits<Scalar>::value(); }

    std::int64_t width() const { return _width; }
    std::int64_t height() const { return _height; }
    int bands() const { return _bands; }
    std::int64_t pixels() const { return _width * _height; }
    const geotransform& transform() const { return _gt; }
    void set_transform(const geotransform& gt) { _gt = gt; }

    Eigen::Array<Scalar, Eigen::Dynamic, 1>& data() { return _data; }
    const Eigen::Array<Scalar, Eigen::Dynamic, 1>& data() const { return _data; }

    plane_map band(int b) { return plane_map(_data.data() + b * pixels(), _height, _width); }
    const_plane_map band(int b) const {
        return const_plane_map(_data.data() + b * pixels(), _height, _width);
    }

    Scalar& at(int b, std::int64_t row, std::int64_t col) {
        return _data[b * pixels() + row * _width + col];
    }
    Scalar at(int b, std::int64_t row, std::int64_t col) const {
        return _data[b * pixels() + row * _width + col];
    }

    bool same_shape(const raster& o) const {
        return _width == o._width && _height == o._height && _bands == o._bands && _gt == o._gt;
    }

    /// Bitwise equality (NaN payloads compare equal to themselves).
    friend bool operator==(const raster& a, const raster& b) {
        if (!a.same_shape(b)) return false;
        return std::memcmp(a._data.data(), b._data.data(), sizeof(Scalar) * a._data.size()) == 0;
    }

   private:
    std::int64_t _width = 0;
    std::int64_t _height = 0;
    int _bands = 0;
    geotransform _gt = identity();
    Eigen::Array<Scalar, Eigen::Dynamic, 1> _data;
};

using label_raster = raster<std::uint8_t>;
using prob_raster = raster<float>;
using any_raster = std::variant<label_raster, prob_raster>;

/// One acquisition of a tile or batch.
template <typename Scalar>
struct timed_raster {
    date timestamp;
    raster<Scalar> image;
};

template <typename Scalar>
using image_collection = std::vector<timed_raster<Scalar>>;

/// Size in bytes of the LRAS header preceding the sample payload.
inline constexpr std::size_t lras_header_size = 76;

template <typename Scalar>
void write_raster(const raster<Scalar>& r, const std::filesystem::path& path);
any_raster read_raster(const std::filesystem::path& path);
/// Reads and requires a u8 label raster.
label_raster read_label_raster(const std::filesystem::path& path);
prob_raster read_prob_raster(const std::filesystem::path& path);

/// Companion metadata stored next to a raster as <name>.meta.json.
struct raster_meta {
    date timestamp;
    std::int64_t batch_id = 0;
    int year = 0;

    friend bool operator==(const raster_meta&, const raster_meta&) = default;
};

std::filesystem::path meta_path_for(const std::filesystem::path& raster_path);
void write_meta(const raster_meta& meta, const std::filesystem::path& raster_path);
raster_meta read_meta(const std::filesystem::path& raster_path);

/// Per-pixel argmax over 9 probability bands; ties resolve to the lowest band index.
label_raster argmax_label(const prob_raster& probs);

/// Sub-raster for a window that must lie inside r; the origin is shifted accordingly.
template <typename Scalar>
raster<Scalar> crop(const raster<Scalar>& r, const pixel_window& w) {
    if (w.width <= 0 || w.height <= 0) throw invalid_argument("crop window has zero size");
    if (w.x0 < 0 || w.y0 < 0 || w.x0 + w.width > r.width() || w.y0 + w.height > r.height())
        throw invalid_argument("crop window outside raster");
    const auto& gt = r.transform();
    geotransform shifted = gt;
    shifted[0] = gt[0] + static_cast<double>(w.x0) * gt[1] + static_cast<double>(w.y0) * gt[2];
    shifted[3] = gt[3] + static_cast<double>(w.x0) * gt[4] + static_cast<double>(w.y0) * gt[5];
    raster<Scalar> out(w.width, w.height, r.bands(), shifted);
    for (int b = 0; b < r.bands(); ++b)
        out.band(b) = r.band(b).block(w.y0, w.x0, w.height, w.width);
    return out;
}

/// Writes `tile` into `target` at the window's offset; shapes must agree.
template <typename Scalar>
void paste(raster<Scalar>& target, const raster<Scalar>& tile, const pixel_window& w) {
    if (tile.width() != w.width || tile.height() != w.height || tile.bands() != target.bands())
        throw invalid_argument("paste: tile does not match window");
    if (w.x0 < 0 || w.y0 < 0 || w.x0 + w.width > target.width() ||
        w.y0 + w.height > target.height())
        throw invalid_argument("paste window outside raster");
    for (int b = 0; b < target.bands(); ++b)
        target.band(b).block(w.y0, w.x0, w.height, w.width) = tile.band(b);
}

/// Per-pixel flag, true where any band holds the nodata sentinel.
template <typename Scalar>
Eigen::Array<bool, Eigen::Dynamic, 1> missing_pixels(const raster<Scalar>& r) {
    Eigen::Array<bool, Eigen::Dynamic, 1> missing =
        Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(r.pixels(), false);
    for (int b = 0; b < r.bands(); ++b) {
        const Scalar* src = r.data().data() + b * r.pixels();
        for (std::int64_t k = 0; k < r.pixels(); ++k) missing[k] = missing[k] || is_nodata(src[k]);
    }
    return missing;
}

template <typename Scalar>
std::int64_t count_missing_pixels(const raster<Scalar>& r) {
    return missing_pixels(r).template cast<std::int64_t>().sum();
}

}  // namespace fishnet
