#include "eafpmed/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "eafpmed/errors.hpp"

namespace eafpmed {

namespace {

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
    static_assert(sizeof(float) == 4);
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    put_u32(buf, bits);
}

class Reader {
public:
    Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(byte()); }
    std::uint16_t u16() {
        std::uint16_t v = byte();
        v |= static_cast<std::uint16_t>(byte()) << 8;
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string bytes(std::size_t n) {
        if (pos_ + n > data_.size()) fail("truncated");
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }
    [[noreturn]] void fail(const std::string& why) const {
        throw FormatError("checkpoint " + path_ + ": " + why + " at offset " + std::to_string(pos_));
    }

private:
    unsigned char byte() {
        if (pos_ >= data_.size()) fail("truncated");
        return static_cast<unsigned char>(data_[pos_++]);
    }
    const std::string& data_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
    std::string buf;
    buf += "EAFP";
    put_u16(buf, kCheckpointVersion);
    put_u32(buf, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
        if (a.name.size() > 0xffff) throw FormatError("checkpoint: array name too long: " + a.name);
        if (static_cast<std::int64_t>(a.values.size()) != a.shape.numel()) {
            throw FormatError("checkpoint: array " + a.name + " value count does not match shape " +
                              a.shape.str());
        }
        put_u16(buf, static_cast<std::uint16_t>(a.name.size()));
        buf += a.name;
        buf.push_back(static_cast<char>(a.shape.rank()));
        for (int i = 0; i < a.shape.rank(); ++i) put_u32(buf, static_cast<std::uint32_t>(a.shape[i]));
        for (float v : a.values) put_f32(buf, v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("checkpoint: write failed for " + path.string());
}

std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r(data, path.string());
    if (r.bytes(4) != "EAFP") r.fail("bad magic, expected EAFP");
    const auto version = r.u16();
    if (version != kCheckpointVersion) {
        r.fail("unsupported format version " + std::to_string(version));
    }
    const auto count = r.u32();
    std::vector<NamedArray> arrays;
    arrays.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        const auto name_len = r.u16();
        a.name = r.bytes(name_len);
        const int rank = r.u8();
        if (rank > 4) r.fail("array " + a.name + " rank " + std::to_string(rank) + " exceeds 4");
        std::int64_t numel = 1;
        std::vector<int> dims;
        for (int d = 0; d < rank; ++d) {
            const auto extent = r.u32();
            if (extent == 0 || extent > 0x7fffffff) r.fail("array " + a.name + " has invalid extent");
            dims.push_back(static_cast<int>(extent));
            numel *= extent;
        }
        Shape shape;
        switch (rank) {
            case 0: shape = Shape{}; break;
            case 1: shape = Shape{dims[0]}; break;
            case 2: shape = Shape{dims[0], dims[1]}; break;
            case 3: shape = Shape{dims[0], dims[1], dims[2]}; break;
            default: shape = Shape{dims[0], dims[1], dims[2], dims[3]}; break;
        }
        a.shape = shape;
        a.values.resize(static_cast<std::size_t>(numel));
        for (auto& v : a.values) v = r.f32();
        arrays.push_back(std::move(a));
    }
    if (!r.done()) r.fail("trailing bytes");
    return arrays;
}

}  // namespace eafpmed
