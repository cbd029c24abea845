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

#include "fishnet/raster.hpp"

#include <bit>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace fishnet {

namespace {

constexpr char lras_magic[4] = {'L', 'R', 'A', 'S'};
constexpr std::uint16_t lras_version = 1;

// sample payloads are copied verbatim; the header is encoded byte by byte
static_assert(std::endian::native == std::endian::little, "LRAS payload I/O assumes a little-endian host");

class byte_writer {
   public:
    explicit byte_writer(std::vector<char>& out) : _out(out) {}

    template <typename T>
    void put(T value) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                        std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
        auto bits = std::bit_cast<U>(value);
        for (std::size_t k = 0; k < sizeof(T); ++k)
            _out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
    }

   private:
    std::vector<char>& _out;
};

class byte_reader {
   public:
    byte_reader(const std::vector<char>& in) : _in(in) {}

    template <typename T>
    T get(const char* field) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                        std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
        if (_pos + sizeof(T) > _in.size())
            throw format_error(std::string("truncated LRAS header reading ") + field, _pos);
        U bits = 0;
        for (std::size_t k = 0; k < sizeof(T); ++k)
            bits |= static_cast<U>(static_cast<unsigned char>(_in[_pos + k])) << (8 * k);
        _pos += sizeof(T);
        return std::bit_cast<T>(bits);
    }

    std::size_t pos() const { return _pos; }

   private:
    const std::vector<char>& _in;
    std::size_t _pos = 0;
};

std::vector<char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw io_error("error reading " + path.string());
    return bytes;
}

template <typename Scalar>
raster<Scalar> decode_payload(const std::vector<char>& bytes, std::size_t offset, std::int64_t width,
                              std::int64_t height, int bands, const geotransform& gt) {
    raster<Scalar> r(width, height, bands, gt);
    const std::size_t n = static_cast<std::size_t>(r.data().size());
    std::memcpy(r.data().data(), bytes.data() + offset, n * sizeof(Scalar));
    return r;
}

}  // namespace

std::string_view class_name(int index) {
    if (index < 0 || index >= num_classes) throw invalid_argument("class index out of range");
    return class_names[static_cast<std::size_t>(index)];
}

int class_from_name(std::string_view name) {
    for (int k = 0; k < num_classes; ++k)
        if (class_names[static_cast<std::size_t>(k)] == name) return k;
    throw invalid_argument("unknown land cover class '" + std::string(name) + "'");
}

template <typename Scalar>
void write_raster(const raster<Scalar>& r, const std::filesystem::path& path) {
    std::vector<char> bytes;
    bytes.reserve(lras_header_size + sizeof(Scalar) * static_cast<std::size_t>(r.data().size()));
    byte_writer w(bytes);
    for (char c : lras_magic) w.put(c);
    w.put(lras_version);
    w.put(std::uint16_t{0});  // flags
    w.put(static_cast<std::uint32_t>(r.width()));
    w.put(static_cast<std::uint32_t>(r.height()));
    w.put(static_cast<std::uint16_t>(r.bands()));
    w.put(nodata_traits<Scalar>::dtype_code);
    w.put(std::uint8_t{0});  // reserved
    for (double v : r.transform()) w.put(v);
    w.put(static_cast<double>(raster<Scalar>::nodata()));
    const char* src = reinterpret_cast<const char*>(r.data().data());
    bytes.insert(bytes.end(), src, src + sizeof(Scalar) * static_cast<std::size_t>(r.data().size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("error writing " + path.string());
}

template void write_raster<std::uint8_t>(const label_raster&, const std::filesystem::path&);
template void write_raster<float>(const prob_raster&, const std::filesystem::path&);

any_raster read_raster(const std::filesystem::path& path) {
    auto bytes = slurp(path);
    byte_reader rd(bytes);
    for (char c : lras_magic) {
        auto got = rd.get<char>("magic");
        if (got != c) throw format_error("bad LRAS magic in " + path.string(), rd.pos() - 1);
    }
    if (auto v = rd.get<std::uint16_t>("version"); v != lras_version)
        throw format_error("unsupported LRAS version " + std::to_string(v), rd.pos() - 2);
    if (auto f = rd.get<std::uint16_t>("flags"); f != 0)
        throw format_error("unsupported LRAS flags", rd.pos() - 2);
    auto width = rd.get<std::uint32_t>("width");
    auto height = rd.get<std::uint32_t>("height");
    auto bands = rd.get<std::uint16_t>("bands");
    auto dtype = rd.get<std::uint8_t>("dtype");
    auto reserved = rd.get<std::uint8_t>("reserved");
    if (dtype > 1) throw format_error("unknown LRAS dtype " + std::to_string(dtype), rd.pos() - 2);
    if (reserved != 0) throw format_error("reserved LRAS byte is not zero", rd.pos() - 1);
    if (width == 0 || height == 0 || bands == 0)
        throw format_error("LRAS raster has a zero dimension", 8);
    geotransform gt;
    for (auto& v : gt) v = rd.get<double>("geotransform");
    double nodata = rd.get<double>("nodata");

    const std::uint64_t sample = dtype == 0 ? 1 : 4;
    const std::uint64_t available = static_cast<std::uint64_t>(bytes.size()) - rd.pos();
    // width*height fits in 64 bits; bound it by the file size before multiplying further
    const std::uint64_t count = static_cast<std::uint64_t>(width) * height;
    if (count > available || count * bands * sample > available)
        throw format_error("truncated LRAS payload in " + path.string(), bytes.size());
    if (count * bands * sample < available)
        throw format_error("trailing bytes after LRAS payload in " + path.string(),
                           rd.pos() + count * bands * sample);

    if (dtype == 0) {
        if (nodata != 255.0) throw format_error("label raster nodata must be 255", rd.pos() - 8);
        return decode_payload<std::uint8_t>(bytes, rd.pos(), width, height, bands, gt);
    }
    if (!std::isnan(nodata)) throw format_error("probability raster nodata must be NaN", rd.pos() - 8);
    return decode_payload<float>(bytes, rd.pos(), width, height, bands, gt);
}

label_raster read_label_raster(const std::filesystem::path& path) {
    auto r = read_raster(path);
    if (auto* l = std::get_if<label_raster>(&r)) return std::move(*l);
    throw invalid_argument(path.string() + " is not a u8 label raster");
}

prob_raster read_prob_raster(const std::filesystem::path& path) {
    auto r = read_raster(path);
    if (auto* p = std::get_if<prob_raster>(&r)) return std::move(*p);
    throw invalid_argument(path.string() + " is not an f32 probability raster");
}

std::filesystem::path meta_path_for(const std::filesystem::path& raster_path) {
    auto p = raster_path;
    p.replace_extension(".meta.json");
    return p;
}

void write_meta(const raster_meta& meta, const std::filesystem::path& raster_path) {
    nlohmann::json doc = {{"timestamp", format_date(meta.timestamp)},
                          {"batch_id", meta.batch_id},
                          {"year", meta.year}};
    auto path = meta_path_for(raster_path);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << doc.dump() << '\n';
    if (!out) throw io_error("error writing " + path.string());
}

raster_meta read_meta(const std::filesystem::path& raster_path) {
    auto path = meta_path_for(raster_path);
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    try {
        auto doc = nlohmann::json::parse(in);
        raster_meta meta;
        meta.timestamp = parse_date(doc.at("timestamp").get<std::string>());
        meta.batch_id = doc.at("batch_id").get<std::int64_t>();
        meta.year = doc.at("year").get<int>();
        return meta;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_argument("malformed raster metadata " + path.string() + ": " + e.what());
    }
}

label_raster argmax_label(const prob_raster& probs) {
    if (probs.bands() != num_classes)
        throw invalid_argument("argmax_label needs 9 probability bands, got " +
                               std::to_string(probs.bands()));
    label_raster out(probs.width(), probs.height(), 1, probs.transform());
    const std::int64_t n = probs.pixels();
    const float* src = probs.data().data();
    auto& dst = out.data();
    for (std::int64_t k = 0; k < n; ++k) {
        int best = -1;
        float best_value = 0.0f;
        for (int b = 0; b < num_classes; ++b) {
            float v = src[b * n + k];
            if (std::isnan(v)) continue;
            if (best < 0 || v > best_value) {
                best = b;
                best_value = v;
            }
        }
        dst[k] = best < 0 ? label_raster::nodata() : static_cast<std::uint8_t>(best);
    }
    return out;
}

}  // namespace fishnet
