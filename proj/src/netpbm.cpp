#include "eafpmed/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "eafpmed/checkpoint.hpp"
#include "eafpmed/errors.hpp"

namespace eafpmed::data {

namespace {

// Reads one whitespace/comment-delimited header token.
std::string next_token(std::istream& in, const std::string& path) {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) return token;
            continue;
        }
        token += static_cast<char>(c);
    }
    if (token.empty()) throw FormatError("netpbm " + path + ": truncated header");
    return token;
}

int parse_positive(const std::string& token, const std::string& path, const char* what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(token, &used);
        if (used != token.size() || v <= 0) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw FormatError("netpbm " + path + ": bad " + std::string(what) + " '" + token + "'");
    }
}

void write_binary(const std::filesystem::path& path, const std::string& magic,
                  const Tensor<float>& image, int channels) {
    if (image.shape().rank() != 3 || image.shape()[0] != channels) {
        throw FormatError("netpbm: expected (" + std::to_string(channels) + ",H,W) image, got " +
                          image.shape().str());
    }
    const int h = image.shape()[1], w = image.shape()[2];
    std::string buf = magic + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    const float* v = image.values().data();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < channels; ++c) {
            const float x = std::clamp(v[static_cast<std::size_t>(c) * plane + i], 0.0f, 1.0f);
            buf += static_cast<char>(std::lround(x * 255.0f));
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("netpbm: cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("netpbm: write failed for " + path.string());
}

}  // namespace

namespace {

// Pre-tensorized image: a checkpoint holding exactly one (C,H,W) array with
// values already in [0,1].
Tensor<float> decode_checkpoint_image(const std::filesystem::path& path) {
    const auto arrays = load_checkpoint(path);
    if (arrays.size() != 1) {
        throw FormatError("image checkpoint " + path.string() + ": expected one array, found " +
                          std::to_string(arrays.size()));
    }
    const auto& a = arrays[0];
    if (a.shape.rank() != 3 || (a.shape[0] != 1 && a.shape[0] != 3)) {
        throw FormatError("image checkpoint " + path.string() + ": array " + a.name + " shape " +
                          a.shape.str() + " is not (1|3,H,W)");
    }
    for (float v : a.values) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw FormatError("image checkpoint " + path.string() + ": pixel " +
                              std::to_string(v) + " outside [0,1]");
        }
    }
    return Tensor<float>::from(a.shape, a.values);
}

}  // namespace

Tensor<float> decode_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("netpbm: cannot open " + path.string());
    const std::string p = path.string();

    {
        char head[4] = {0, 0, 0, 0};
        in.read(head, 4);
        if (in.gcount() == 4 && std::string(head, 4) == "EAFP") {
            in.close();
            return decode_checkpoint_image(path);
        }
        in.clear();
        in.seekg(0);
    }

    const std::string magic = next_token(in, p);
    int channels;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw FormatError("netpbm " + p + ": unsupported magic '" + magic + "' (binary P5/P6 only)");
    }
    const int w = parse_positive(next_token(in, p), p, "width");
    const int h = parse_positive(next_token(in, p), p, "height");
    const int maxval = parse_positive(next_token(in, p), p, "maxval");
    if (maxval > 255) {
        throw FormatError("netpbm " + p + ": maxval " + std::to_string(maxval) +
                          " unsupported (8-bit only)");
    }

    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::string raster(plane * static_cast<std::size_t>(channels), '\0');
    in.read(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (in.gcount() != static_cast<std::streamsize>(raster.size())) {
        throw FormatError("netpbm " + p + ": truncated raster");
    }

    std::vector<float> values(raster.size());
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < channels; ++c) {
            const auto byte = static_cast<unsigned char>(raster[i * channels + static_cast<std::size_t>(c)]);
            if (byte > maxval) {
                throw FormatError("netpbm " + p + ": sample " + std::to_string(byte) +
                                  " exceeds maxval " + std::to_string(maxval));
            }
            // divide, not multiply by a reciprocal: decode(encode(x)) must be
            // bit-exact for 8-bit data
            values[static_cast<std::size_t>(c) * plane + i] =
                static_cast<float>(byte) / static_cast<float>(maxval);
        }
    }
    return Tensor<float>::from(Shape{channels, h, w}, std::move(values));
}

void write_pgm(const std::filesystem::path& path, const Tensor<float>& image) {
    write_binary(path, "P5", image, 1);
}

void write_ppm(const std::filesystem::path& path, const Tensor<float>& image) {
    write_binary(path, "P6", image, 3);
}

Tensor<float> resize_bilinear(const Tensor<float>& image, int out_height, int out_width) {
    if (image.shape().rank() != 3) {
        throw ShapeError("resize: image rank " + std::to_string(image.shape().rank()) +
                         " must be 3 (CHW)");
    }
    if (out_height <= 0 || out_width <= 0) {
        throw ShapeError("resize: target extents must be positive");
    }
    const int channels = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
    if (h == out_height && w == out_width) return image.detach();

    // Corner-aligned: source position = dst * (in-1)/(out-1); a single output
    // row/column samples the source center.
    auto src_pos = [](int dst, int out, int in) {
        if (out == 1) return (in - 1) / 2.0f;
        return static_cast<float>(dst) * static_cast<float>(in - 1) / static_cast<float>(out - 1);
    };

    std::vector<float> out(static_cast<std::size_t>(channels) * out_height * out_width);
    const float* src = image.values().data();
    for (int c = 0; c < channels; ++c) {
        const float* plane = src + static_cast<std::size_t>(c) * h * w;
        float* dst = out.data() + static_cast<std::size_t>(c) * out_height * out_width;
        for (int r = 0; r < out_height; ++r) {
            const float fy = src_pos(r, out_height, h);
            const int y0 = std::min(static_cast<int>(fy), h - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const float wy = fy - static_cast<float>(y0);
            for (int col = 0; col < out_width; ++col) {
                const float fx = src_pos(col, out_width, w);
                const int x0 = std::min(static_cast<int>(fx), w - 1);
                const int x1 = std::min(x0 + 1, w - 1);
                const float wx = fx - static_cast<float>(x0);
                const float top = plane[static_cast<std::size_t>(y0) * w + x0] * (1.0f - wx) +
                                  plane[static_cast<std::size_t>(y0) * w + x1] * wx;
                const float bot = plane[static_cast<std::size_t>(y1) * w + x0] * (1.0f - wx) +
                                  plane[static_cast<std::size_t>(y1) * w + x1] * wx;
                dst[static_cast<std::size_t>(r) * out_width + col] = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return Tensor<float>::from(Shape{channels, out_height, out_width}, std::move(out));
}

}  // namespace eafpmed::data
