// Parallel frames, per-layer delay patterns, hierarchical codec grouping,
// and the framed binary file format for token grids.
#pragma once

#include "lucy/vocab.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lucy {

// One decode step: one text token plus one token per audio layer.
struct ParallelFrame {
    token_id text = 0;
    std::vector<token_id> audio;

    std::uint32_t arity() const { return 1 + static_cast<std::uint32_t>(audio.size()); }
    bool operator==(const ParallelFrame&) const = default;
};

struct ParallelSequence {
    std::vector<ParallelFrame> frames;

    std::size_t length() const { return frames.size(); }
    bool operator==(const ParallelSequence&) const = default;
};

// A time-staggered grid is just a frame list; index = decode step.
using DelayedGrid = std::vector<ParallelFrame>;

// Per-layer step offsets. offsets[0] is the text layer and must be 0;
// offsets must be non-decreasing.
struct DelayPattern {
    std::vector<std::uint32_t> offsets;

    static DelayPattern cumulative(std::uint32_t num_layers); // 0,1,2,...
    static DelayPattern uniform(std::uint32_t num_layers);    // 0,1,1,...
    static DelayPattern none(std::uint32_t num_layers);       // 0,0,0,...

    std::uint32_t arity() const { return static_cast<std::uint32_t>(offsets.size()); }
    std::uint32_t max_offset() const;
    void validate() const;
};

// Shifts layer k of frame t to grid step t + offsets[k]; pads elsewhere.
// Output length is exactly seq.length() + max offset.
DelayedGrid apply_delay(const ParallelSequence& seq, const DelayPattern& pat,
                        token_id pad_text, token_id pad_audio);

// Exact inverse of apply_delay on its image.
ParallelSequence remove_delay(const DelayedGrid& grid, const DelayPattern& pat);

// Coarse/mid/fine codec streams with 1:2:4 length ratios.
struct HierarchicalCodes {
    std::vector<token_id> coarse;
    std::vector<token_id> mid;
    std::vector<token_id> fine;

    bool operator==(const HierarchicalCodes&) const = default;
};

// Group t = [coarse[t], mid[2t], mid[2t+1], fine[4t..4t+3]].
std::vector<std::array<token_id, 7>> flatten_hierarchy(const HierarchicalCodes& h);
HierarchicalCodes unflatten_hierarchy(const std::vector<std::array<token_id, 7>>& groups);

struct RateReport {
    double coarse_hz = 0;
    double mid_hz = 0;
    double fine_hz = 0;
    double total_hz = 0;
};

// Per-layer and total token rates for a decode-step rate in Hz.
RateReport rate_check(double frame_rate_hz);

// Framed binary container: magic "LUCY", version u8, layer count u8,
// length u32 LE, then a row-major little-endian payload. Version 1 carries
// u32 token ids (grids and sequences); version 2 carries f32 features.
inline constexpr char kFramesMagic[4] = {'L', 'U', 'C', 'Y'};
inline constexpr std::uint8_t kFramesVersionTokens = 1;
inline constexpr std::uint8_t kFramesVersionFeatures = 2;

void write_frames(std::ostream& out, const std::vector<ParallelFrame>& frames,
                  std::uint32_t num_layers);
std::vector<ParallelFrame> read_frames(std::istream& in);
void save_frames(const std::string& path, const std::vector<ParallelFrame>& frames,
                 std::uint32_t num_layers);
std::vector<ParallelFrame> load_frames(const std::string& path);

// Low-level header helpers shared with the feature-file variant.
void write_frames_header(std::ostream& out, std::uint8_t version, std::uint8_t layers,
                         std::uint32_t length);
struct FramesHeader {
    std::uint8_t version = 0;
    std::uint8_t layers = 0;
    std::uint32_t length = 0;
};
FramesHeader read_frames_header(std::istream& in);
void write_u32_le(std::ostream& out, std::uint32_t v);
std::uint32_t read_u32_le(std::istream& in);

} // namespace lucy
