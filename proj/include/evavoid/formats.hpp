#pragma once

// Little-endian binary containers.
//   EVS1: "EVS1", u32 width, u32 height, u64 count, count x (u64 t_us, u16 x, u16 y, i8 p)
//   DPT1: "DPT1", u32 width, u32 height, u64 timestamp_us, width*height f32 (meters)
//   IMG1: same as DPT1 with intensities in [0, 1]
//   MDL1: "MDL1", u32 version, u32 entry count, entries of
//         (u32 name length, name, u8 part, u32 rank, rank x u32 dim),
//         then f64 payload in entry order

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evavoid/events.hpp"
#include "evavoid/learner.hpp"
#include "evavoid/render.hpp"

namespace evavoid {

using Bytes = std::vector<std::uint8_t>;

struct EventFile {
    int width = 0;
    int height = 0;
    std::vector<Event> events;
    friend bool operator==(const EventFile&, const EventFile&) = default;
};

Bytes encode_events(const EventFile& f);
EventFile decode_events(const Bytes& b);

Bytes encode_depth(const DepthMap& d);
DepthMap decode_depth(const Bytes& b);
Bytes encode_image(const Frame& f);
Frame decode_image(const Bytes& b);

inline constexpr std::uint32_t kCheckpointVersion = 1;

// The network input size is stored as a payload-free layout entry named
// "input" with shape [1, size, size].
Bytes encode_checkpoint(const ModelParams& params, const NetConfig& cfg);
std::pair<NetConfig, ModelParams> decode_checkpoint(const Bytes& b);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Bytes& bytes);

inline void save_events(const std::filesystem::path& p, const EventFile& f) { write_file(p, encode_events(f)); }
inline EventFile load_events(const std::filesystem::path& p) { return decode_events(read_file(p)); }
inline void save_depth(const std::filesystem::path& p, const DepthMap& d) { write_file(p, encode_depth(d)); }
inline DepthMap load_depth(const std::filesystem::path& p) { return decode_depth(read_file(p)); }
inline void save_image(const std::filesystem::path& p, const Frame& f) { write_file(p, encode_image(f)); }
inline Frame load_image(const std::filesystem::path& p) { return decode_image(read_file(p)); }
inline void save_checkpoint(const std::filesystem::path& p, const ModelParams& m, const NetConfig& c) {
    write_file(p, encode_checkpoint(m, c));
}
inline std::pair<NetConfig, ModelParams> load_checkpoint(const std::filesystem::path& p) {
    return decode_checkpoint(read_file(p));
}

}  // namespace evavoid
