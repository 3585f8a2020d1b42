#pragma once

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "fgip/grid.hpp"

namespace fgip {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline ImageGrid grid_from_bytes(const std::vector<unsigned char>& bytes, int h, int w,
                                 int channels, int bit_depth, double maxval) {
    ImageGrid img(h, w, channels);
    const std::size_t n = img.size();
    if (bit_depth == 8) {
        for (std::size_t k = 0; k < n; ++k) img.samples[k] = bytes[k] / maxval;
    } else {  // 16-bit big-endian
        for (std::size_t k = 0; k < n; ++k) {
            const unsigned v = (static_cast<unsigned>(bytes[2 * k]) << 8) | bytes[2 * k + 1];
            img.samples[k] = v / maxval;
        }
    }
    return img;
}

inline ImageGrid load_png(std::FILE* fp, const std::string& path) {
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp) != 8 || png_sig_cmp(sig, 0, 8))
        throw IoError(path + ": not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError(path + ": libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError(path + ": libpng initialization failed");
    }

    std::vector<unsigned char> data;
    std::vector<png_bytep> rows;
    std::string error;
    // libpng reports errors by longjmp back to here; only C frames are skipped.
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path + ": corrupt PNG" + (error.empty() ? "" : " (" + error + ")"));
    }

    png_init_io(png, fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth_in = png_get_bit_depth(png, info);
    if ((color_type & PNG_COLOR_MASK_ALPHA) || png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path + ": images with an alpha channel are not supported");
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth_in < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int channels = png_get_channels(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path + ": only grayscale and RGB images are supported");
    }
    if (bit_depth != 8 && bit_depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path + ": unsupported bit depth");
    }

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    data.resize(rowbytes * h);
    rows.resize(h);
    for (int i = 0; i < h; ++i) rows[i] = data.data() + rowbytes * i;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    return grid_from_bytes(data, h, w, channels, bit_depth, bit_depth == 8 ? 255.0 : 65535.0);
}

inline int pnm_next_token(std::FILE* fp, std::string& token) {
    token.clear();
    int ch;
    while ((ch = std::fgetc(fp)) != EOF) {
        if (ch == '#') {  // comment to end of line
            while ((ch = std::fgetc(fp)) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!token.empty()) return 0;
            continue;
        }
        token.push_back(static_cast<char>(ch));
    }
    return token.empty() ? -1 : 0;
}

inline ImageGrid load_pnm(std::FILE* fp, const std::string& path) {
    std::string tok;
    if (pnm_next_token(fp, tok) != 0) throw IoError(path + ": truncated header");
    int channels;
    if (tok == "P5")
        channels = 1;
    else if (tok == "P6")
        channels = 3;
    else
        throw IoError(path + ": unsupported format (expected binary P5 or P6)");

    long dims[3];
    for (long& d : dims) {
        if (pnm_next_token(fp, tok) != 0) throw IoError(path + ": truncated header");
        try {
            d = std::stol(tok);
        } catch (const std::exception&) {
            throw IoError(path + ": malformed header token '" + tok + "'");
        }
    }
    const long w = dims[0], h = dims[1], maxval = dims[2];
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw IoError(path + ": malformed dimensions or sample depth");

    const int bit_depth = maxval > 255 ? 16 : 8;
    const std::size_t n =
        static_cast<std::size_t>(w) * h * channels * (bit_depth == 16 ? 2 : 1);
    std::vector<unsigned char> data(n);
    if (std::fread(data.data(), 1, n, fp) != n) throw IoError(path + ": truncated sample data");

    return grid_from_bytes(data, static_cast<int>(h), static_cast<int>(w), channels, bit_depth,
                           static_cast<double>(maxval));
}

inline std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot);
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

inline std::vector<unsigned char> quantize8(const ImageGrid& img) {
    std::vector<unsigned char> bytes(img.size());
    for (std::size_t k = 0; k < img.size(); ++k) {
        double v = img.samples[k];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        bytes[k] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    return bytes;
}

inline void save_png(const ImageGrid& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError(path + ": cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError(path + ": libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError(path + ": libpng initialization failed");
    }

    std::vector<unsigned char> bytes = quantize8(img);
    std::vector<png_bytep> rows(img.height);
    const std::size_t rowbytes = static_cast<std::size_t>(img.width) * img.channels;
    for (int i = 0; i < img.height; ++i) rows[i] = bytes.data() + rowbytes * i;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path + ": PNG write failed");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void save_pnm(const ImageGrid& img, const std::string& path, int want_channels) {
    if (img.channels != want_channels)
        throw ContractError(path + ": extension requires " + std::to_string(want_channels) +
                            " channel(s), image has " + std::to_string(img.channels));
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError(path + ": cannot open for writing");
    const std::string header = std::string(want_channels == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(img.width) + " " + std::to_string(img.height) +
                               "\n255\n";
    std::vector<unsigned char> bytes = quantize8(img);
    if (std::fwrite(header.data(), 1, header.size(), fp.get()) != header.size() ||
        std::fwrite(bytes.data(), 1, bytes.size(), fp.get()) != bytes.size())
        throw IoError(path + ": short write");
}

}  // namespace detail

// Decodes PNG (8/16-bit grayscale or RGB, no alpha) and binary PGM/PPM; the
// format is detected from the file content, not the name. Samples land in
// [0, 1] as value/maxval.
inline ImageGrid load_image(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError(path + ": cannot open file");
    unsigned char magic[2] = {0, 0};
    if (std::fread(magic, 1, 2, fp.get()) != 2) throw IoError(path + ": file too short");
    std::rewind(fp.get());
    if (magic[0] == 0x89 && magic[1] == 'P') return detail::load_png(fp.get(), path);
    if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'))
        return detail::load_pnm(fp.get(), path);
    throw IoError(path + ": unsupported format (expected PNG, PGM, or PPM)");
}

// Writes 8-bit output; the container comes from the extension: .png, .pgm
// (grayscale), or .ppm (RGB). Samples are clipped and rounded to the nearest
// of 256 levels.
inline void save_image(const ImageGrid& img, const std::string& path) {
    const std::string ext = detail::lower_ext(path);
    if (ext == ".png")
        detail::save_png(img, path);
    else if (ext == ".pgm")
        detail::save_pnm(img, path, 1);
    else if (ext == ".ppm")
        detail::save_pnm(img, path, 3);
    else
        throw IoError(path + ": unsupported output extension (use .png, .pgm, or .ppm)");
}

}  // namespace fgip
