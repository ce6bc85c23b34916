#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzyseg/grid.hpp"
#include "fuzzyseg/model.hpp"

namespace fuzzyseg {

namespace io_detail {

inline void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("unexpected end of file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

inline float get_f32(std::istream& in) {
    uint32_t v = get_u32(in);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace io_detail

// --- FZM1: float raster ------------------------------------------------------
// 16-byte header: magic "FZM1", height, width, channels (u32 LE), followed by
// f32 LE values, row-major, channel-interleaved.

inline void write_fzm1(const std::string& path, const Grid3D& raster) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write FZM1 file: " + path);
    out.write("FZM1", 4);
    io_detail::put_u32(out, static_cast<uint32_t>(raster.height));
    io_detail::put_u32(out, static_cast<uint32_t>(raster.width));
    io_detail::put_u32(out, static_cast<uint32_t>(raster.channels));
    for (int r = 0; r < raster.height; ++r)
        for (int c = 0; c < raster.width; ++c)
            for (int ch = 0; ch < raster.channels; ++ch)
                io_detail::put_f32(out, static_cast<float>(raster.at(ch, r, c)));
    if (!out) throw std::runtime_error("write error on FZM1 file: " + path);
}

inline void write_fzm1(const std::string& path, const Grid2D& raster) {
    Grid3D g(1, raster.height, raster.width);
    g.values = raster.values;
    write_fzm1(path, g);
}

inline Grid3D read_fzm1(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open FZM1 file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "FZM1", 4) != 0) throw std::runtime_error("bad FZM1 magic in " + path);
    uint32_t h = io_detail::get_u32(in);
    uint32_t w = io_detail::get_u32(in);
    uint32_t ch = io_detail::get_u32(in);
    if (h == 0 || w == 0 || ch == 0 || h > (1u << 20) || w > (1u << 20) || ch > 4096)
        throw std::runtime_error("implausible FZM1 dimensions in " + path);
    Grid3D g(static_cast<int>(ch), static_cast<int>(h), static_cast<int>(w));
    for (uint32_t r = 0; r < h; ++r)
        for (uint32_t c = 0; c < w; ++c)
            for (uint32_t k = 0; k < ch; ++k) g.at(static_cast<int>(k), static_cast<int>(r), static_cast<int>(c)) = io_detail::get_f32(in);
    return g;
}

// --- PNG ----------------------------------------------------------------------

// Hard mask as 8-bit grayscale: 0 = background, 255*class/(C-1) otherwise.
inline void write_mask_png(const std::string& path, const MaskGrid& mask, int classes = 2) {
    std::vector<uint8_t> buf(mask.size());
    for (size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<uint8_t>(mask.values[i] == 0 ? 0 : 255 * mask.values[i] / (classes - 1));
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(mask.width);
    img.height = static_cast<png_uint_32>(mask.height);
    img.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
        throw std::runtime_error("PNG write failed: " + path + ": " + img.message);
}

// [0,1] grid as an 8-bit grayscale heatmap.
inline void write_heatmap_png(const std::string& path, const Grid2D& grid) {
    std::vector<uint8_t> buf(grid.size());
    for (size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<uint8_t>(std::lround(std::clamp(grid.values[i], 0.0, 1.0) * 255.0));
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(grid.width);
    img.height = static_cast<png_uint_32>(grid.height);
    img.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
        throw std::runtime_error("PNG write failed: " + path + ": " + img.message);
}

// 3-channel [0,1] image as RGB8.
inline void write_rgb_png(const std::string& path, const Grid3D& image) {
    if (image.channels != 3) throw std::invalid_argument("write_rgb_png: need 3 channels");
    std::vector<uint8_t> buf(static_cast<size_t>(image.height) * image.width * 3);
    size_t i = 0;
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c)
            for (int ch = 0; ch < 3; ++ch)
                buf[i++] = static_cast<uint8_t>(std::lround(std::clamp(image.at(ch, r, c), 0.0, 1.0) * 255.0));
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
        throw std::runtime_error("PNG write failed: " + path + ": " + img.message);
}

// Any PNG as a 3 x H x W grid scaled to [0,1].
inline Grid3D read_rgb_png(const std::string& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw std::runtime_error("PNG read failed: " + path + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    std::vector<uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
        throw std::runtime_error("PNG read failed: " + path + ": " + img.message);
    Grid3D out(3, static_cast<int>(img.height), static_cast<int>(img.width));
    size_t i = 0;
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c)
            for (int ch = 0; ch < 3; ++ch) out.at(ch, r, c) = buf[i++] / 255.0;
    return out;
}

// Grayscale class PNG back to a hard mask (inverse of write_mask_png).
inline MaskGrid read_mask_png(const std::string& path, int classes = 2) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw std::runtime_error("PNG read failed: " + path + ": " + img.message);
    img.format = PNG_FORMAT_GRAY;
    std::vector<uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
        throw std::runtime_error("PNG read failed: " + path + ": " + img.message);
    MaskGrid mask(static_cast<int>(img.height), static_cast<int>(img.width));
    for (size_t i = 0; i < buf.size(); ++i)
        mask.values[i] = static_cast<uint8_t>((buf[i] * (classes - 1) + 127) / 255);
    return mask;
}

// --- UNC1: model checkpoint ----------------------------------------------------
// Layout: magic "UNC1"; config as five u32 LE (in_channels, classes, depth,
// base_channels, head: 0 softmax / 1 sigmoid); u32 parameter count; then per
// parameter: u32 name length, name bytes, u32 ndim, u32 dims, f32 LE values.

inline void write_checkpoint(const std::string& path, const UNetConfig& cfg, const ParamStore& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write("UNC1", 4);
    io_detail::put_u32(out, static_cast<uint32_t>(cfg.in_channels));
    io_detail::put_u32(out, static_cast<uint32_t>(cfg.classes));
    io_detail::put_u32(out, static_cast<uint32_t>(cfg.depth));
    io_detail::put_u32(out, static_cast<uint32_t>(cfg.base_channels));
    io_detail::put_u32(out, cfg.head == HeadKind::SoftmaxC ? 0u : 1u);
    io_detail::put_u32(out, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        io_detail::put_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        io_detail::put_u32(out, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) io_detail::put_u32(out, static_cast<uint32_t>(d));
        for (double v : t.v) io_detail::put_f32(out, static_cast<float>(v));
    }
    if (!out) throw std::runtime_error("write error on checkpoint: " + path);
}

inline std::pair<UNetConfig, ParamStore> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "UNC1", 4) != 0) throw std::runtime_error("bad UNC1 magic in " + path);
    UNetConfig cfg;
    cfg.in_channels = static_cast<int>(io_detail::get_u32(in));
    cfg.classes = static_cast<int>(io_detail::get_u32(in));
    cfg.depth = static_cast<int>(io_detail::get_u32(in));
    cfg.base_channels = static_cast<int>(io_detail::get_u32(in));
    cfg.head = io_detail::get_u32(in) == 0 ? HeadKind::SoftmaxC : HeadKind::Sigmoid1;
    cfg.validate();
    uint32_t count = io_detail::get_u32(in);
    ParamStore params;
    for (uint32_t p = 0; p < count; ++p) {
        uint32_t name_len = io_detail::get_u32(in);
        if (name_len > 4096) throw std::runtime_error("implausible name length in checkpoint " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        uint32_t ndim = io_detail::get_u32(in);
        if (ndim > 8) throw std::runtime_error("implausible tensor rank in checkpoint " + path);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(io_detail::get_u32(in));
        Tensor t(shape);
        for (double& v : t.v) v = io_detail::get_f32(in);
        params[name] = std::move(t);
    }
    // shape table must match the config
    ParamStore expect = make_param_store(cfg);
    if (expect.size() != params.size()) throw std::runtime_error("checkpoint parameter set mismatch in " + path);
    for (const auto& [name, t] : expect) {
        auto it = params.find(name);
        if (it == params.end() || it->second.shape != t.shape)
            throw std::runtime_error("checkpoint tensor '" + name + "' mismatch in " + path);
    }
    return {cfg, std::move(params)};
}

}  // namespace fuzzyseg
