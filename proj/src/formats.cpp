#include "evavoid/formats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace evavoid {
namespace {

class Writer {
public:
    void magic(const char (&m)[5]) { out_.insert(out_.end(), m, m + 4); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }
    Bytes take() { return std::move(out_); }
    void reserve(std::size_t n) { out_.reserve(n); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    Bytes out_;
};

class Reader {
public:
    Reader(const Bytes& b, const char* what) : b_(b), what_(what) {}

    void magic(const char (&m)[5]) {
        need(4);
        if (std::memcmp(b_.data() + pos_, m, 4) != 0) fail("bad magic");
        pos_ += 4;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) fail("truncated");
    }
    void finish() const {
        if (pos_ != b_.size()) fail("trailing bytes");
    }
    [[noreturn]] void fail(const std::string& why) const { throw ValidationError(std::string(what_) + ": " + why); }

private:
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    const Bytes& b_;
    const char* what_;
    std::size_t pos_ = 0;
};

template <class Img>
Bytes encode_raster(const char (&magic)[5], const Img& img, const std::vector<float>& data) {
    if (data.size() != static_cast<std::size_t>(img.width) * img.height)
        throw ShapeError("raster: data size does not match dimensions");
    Writer w;
    w.reserve(24 + 4 * data.size());
    w.magic(magic);
    w.u32(static_cast<std::uint32_t>(img.width));
    w.u32(static_cast<std::uint32_t>(img.height));
    w.u64(img.t_us);
    for (float v : data) w.f32(v);
    return w.take();
}

template <class Img>
Img decode_raster(const char (&magic)[5], const Bytes& b, std::vector<float> Img::*field, const char* what) {
    Reader r(b, what);
    r.magic(magic);
    Img img;
    const std::uint32_t w = r.u32();
    const std::uint32_t h = r.u32();
    if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) r.fail("invalid dimensions");
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.t_us = r.u64();
    const std::size_t n = static_cast<std::size_t>(w) * h;
    r.need(4 * n);
    (img.*field).resize(n);
    for (std::size_t i = 0; i < n; ++i) (img.*field)[i] = r.f32();
    r.finish();
    return img;
}

}  // namespace

Bytes encode_events(const EventFile& f) {
    Writer w;
    w.reserve(24 + 13 * f.events.size());
    w.magic("EVS1");
    w.u32(static_cast<std::uint32_t>(f.width));
    w.u32(static_cast<std::uint32_t>(f.height));
    w.u64(f.events.size());
    for (const Event& e : f.events) {
        w.u64(e.t);
        w.u16(e.x);
        w.u16(e.y);
        w.u8(static_cast<std::uint8_t>(e.p));
    }
    return w.take();
}

EventFile decode_events(const Bytes& b) {
    Reader r(b, "EVS1");
    r.magic("EVS1");
    EventFile f;
    f.width = static_cast<int>(r.u32());
    f.height = static_cast<int>(r.u32());
    const std::uint64_t n = r.u64();
    if (n > (b.size() / 13)) r.fail("event count exceeds file size");
    f.events.resize(n);
    for (Event& e : f.events) {
        e.t = r.u64();
        e.x = r.u16();
        e.y = r.u16();
        e.p = static_cast<std::int8_t>(r.u8());
        if (e.p != 1 && e.p != -1) r.fail("polarity must be +1 or -1");
        if (e.x >= f.width || e.y >= f.height) r.fail("event outside sensor");
    }
    r.finish();
    return f;
}

Bytes encode_depth(const DepthMap& d) { return encode_raster("DPT1", d, d.depth); }
DepthMap decode_depth(const Bytes& b) { return decode_raster<DepthMap>("DPT1", b, &DepthMap::depth, "DPT1"); }
Bytes encode_image(const Frame& f) { return encode_raster("IMG1", f, f.intensity); }
Frame decode_image(const Bytes& b) { return decode_raster<Frame>("IMG1", b, &Frame::intensity, "IMG1"); }

Bytes encode_checkpoint(const ModelParams& params, const NetConfig& cfg) {
    params.validate();
    Writer w;
    w.magic("MDL1");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(params.layout.size() + 1));
    auto entry = [&](const std::string& name, std::uint8_t part, const std::vector<std::uint32_t>& shape) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.u8(part);
        w.u32(static_cast<std::uint32_t>(shape.size()));
        for (auto d : shape) w.u32(d);
    };
    const auto s = static_cast<std::uint32_t>(cfg.input_size);
    entry("input", 2, {1, s, s});
    for (const auto& slot : params.layout) entry(slot.name, static_cast<std::uint8_t>(slot.part), slot.shape);
    for (const auto& slot : params.layout)
        for (double v : params.view(slot)) w.f64(v);
    return w.take();
}

std::pair<NetConfig, ModelParams> decode_checkpoint(const Bytes& b) {
    Reader r(b, "MDL1");
    r.magic("MDL1");
    if (r.u32() != kCheckpointVersion) r.fail("unsupported version");
    const std::uint32_t n = r.u32();
    if (n > 4096) r.fail("too many layout entries");

    struct Entry {
        std::string name;
        std::uint8_t part;
        std::vector<std::uint32_t> shape;
    };
    std::vector<Entry> entries;
    for (std::uint32_t i = 0; i < n; ++i) {
        Entry e;
        const std::uint32_t len = r.u32();
        if (len > 256) r.fail("layout name too long");
        e.name = r.str(len);
        e.part = r.u8();
        const std::uint32_t rank = r.u32();
        if (rank > 8) r.fail("tensor rank too large");
        for (std::uint32_t k = 0; k < rank; ++k) e.shape.push_back(r.u32());
        entries.push_back(std::move(e));
    }

    auto find = [&](const std::string& name) -> const Entry* {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    };
    auto dim = [&](const std::string& name, std::size_t k) -> int {
        const Entry* e = find(name);
        if (!e || e->shape.size() <= k) r.fail("missing or malformed entry " + name);
        return static_cast<int>(e->shape[k]);
    };

    NetConfig cfg;
    cfg.input_size = dim("input", 1);
    cfg.enc1_channels = dim("enc1.weight", 0);
    cfg.enc2_channels = dim("enc2.weight", 0);
    cfg.recurrent = find("gru.update.weight") != nullptr;
    cfg.dec1_channels = dim("dec1.weight", 0);
    cfg.head_channels = dim("head.conv.weight", 0);
    cfg.head_hidden = dim("head.fc1.weight", 0);
    const int pooled = dim("head.fc1.weight", 1) / std::max(cfg.head_channels, 1);
    cfg.head_grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(pooled))));

    const DepthVelocityNet net(cfg);
    ModelParams params;
    params.layout = net.layout();
    params.theta.resize(net.theta_size());
    params.phi.resize(net.phi_size());
    if (entries.size() != params.layout.size() + 1) r.fail("layout does not match a known architecture");
    for (std::size_t i = 0; i < params.layout.size(); ++i) {
        const Entry& e = entries[i + 1];
        const TensorSlot& s = params.layout[i];
        if (e.name != s.name || e.part != static_cast<std::uint8_t>(s.part) || e.shape != s.shape)
            r.fail("layout entry mismatch at " + e.name);
    }
    r.need(8 * params.count());
    for (const auto& slot : params.layout)
        for (double& v : params.view(slot)) v = r.f64();
    r.finish();
    params.validate();
    return {cfg, std::move(params)};
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    Bytes b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw IoError("read failed: " + path.string());
    return b;
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace evavoid
