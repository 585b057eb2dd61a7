#include "lucy/framing.hpp"
#include "lucy/errors.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

namespace lucy {

DelayPattern DelayPattern::cumulative(std::uint32_t num_layers) {
    DelayPattern pat;
    pat.offsets.resize(num_layers);
    for (std::uint32_t k = 0; k < num_layers; ++k) pat.offsets[k] = k;
    return pat;
}

DelayPattern DelayPattern::uniform(std::uint32_t num_layers) {
    DelayPattern pat;
    pat.offsets.assign(num_layers, 1);
    if (num_layers > 0) pat.offsets[0] = 0;
    return pat;
}

DelayPattern DelayPattern::none(std::uint32_t num_layers) {
    DelayPattern pat;
    pat.offsets.assign(num_layers, 0);
    return pat;
}

std::uint32_t DelayPattern::max_offset() const {
    if (offsets.empty()) return 0;
    return *std::max_element(offsets.begin(), offsets.end());
}

void DelayPattern::validate() const {
    if (offsets.empty()) throw shape_error("delay pattern must cover at least one layer");
    if (offsets[0] != 0) throw shape_error("text layer offset must be 0");
    for (std::size_t k = 1; k < offsets.size(); ++k)
        if (offsets[k] < offsets[k - 1]) throw shape_error("delay offsets must be non-decreasing");
}

namespace {

void check_arity(const ParallelFrame& frame, std::uint32_t arity, const char* what) {
    if (frame.arity() != arity)
        throw shape_error(std::string(what) + ": frame arity " + std::to_string(frame.arity()) +
                          " does not match pattern arity " + std::to_string(arity));
}

} // namespace

DelayedGrid apply_delay(const ParallelSequence& seq, const DelayPattern& pat, token_id pad_text,
                        token_id pad_audio) {
    pat.validate();
    const std::uint32_t arity = pat.arity();
    for (const ParallelFrame& frame : seq.frames) check_arity(frame, arity, "apply_delay");

    const std::size_t len = seq.length();
    const std::size_t grid_len = len + pat.max_offset();

    ParallelFrame pad_frame;
    pad_frame.text = pad_text;
    pad_frame.audio.assign(arity - 1, pad_audio);

    DelayedGrid grid(grid_len, pad_frame);
    for (std::size_t t = 0; t < len; ++t) {
        grid[t + pat.offsets[0]].text = seq.frames[t].text;
        for (std::uint32_t k = 1; k < arity; ++k)
            grid[t + pat.offsets[k]].audio[k - 1] = seq.frames[t].audio[k - 1];
    }
    return grid;
}

ParallelSequence remove_delay(const DelayedGrid& grid, const DelayPattern& pat) {
    pat.validate();
    const std::uint32_t arity = pat.arity();
    for (const ParallelFrame& frame : grid) check_arity(frame, arity, "remove_delay");

    const std::uint32_t max_off = pat.max_offset();
    if (grid.size() < max_off)
        throw shape_error("grid of length " + std::to_string(grid.size()) +
                          " shorter than max offset " + std::to_string(max_off));

    const std::size_t len = grid.size() - max_off;
    ParallelSequence seq;
    seq.frames.resize(len);
    for (std::size_t t = 0; t < len; ++t) {
        seq.frames[t].text = grid[t + pat.offsets[0]].text;
        seq.frames[t].audio.resize(arity - 1);
        for (std::uint32_t k = 1; k < arity; ++k)
            seq.frames[t].audio[k - 1] = grid[t + pat.offsets[k]].audio[k - 1];
    }
    return seq;
}

std::vector<std::array<token_id, 7>> flatten_hierarchy(const HierarchicalCodes& h) {
    if (h.mid.size() != 2 * h.coarse.size() || h.fine.size() != 4 * h.coarse.size())
        throw shape_error("hierarchical streams must have 1:2:4 length ratios");
    std::vector<std::array<token_id, 7>> groups(h.coarse.size());
    for (std::size_t t = 0; t < h.coarse.size(); ++t) {
        groups[t] = {h.coarse[t], h.mid[2 * t],     h.mid[2 * t + 1], h.fine[4 * t],
                     h.fine[4 * t + 1], h.fine[4 * t + 2], h.fine[4 * t + 3]};
    }
    return groups;
}

HierarchicalCodes unflatten_hierarchy(const std::vector<std::array<token_id, 7>>& groups) {
    HierarchicalCodes h;
    h.coarse.reserve(groups.size());
    h.mid.reserve(2 * groups.size());
    h.fine.reserve(4 * groups.size());
    for (const auto& g : groups) {
        h.coarse.push_back(g[0]);
        h.mid.push_back(g[1]);
        h.mid.push_back(g[2]);
        h.fine.push_back(g[3]);
        h.fine.push_back(g[4]);
        h.fine.push_back(g[5]);
        h.fine.push_back(g[6]);
    }
    return h;
}

RateReport rate_check(double frame_rate_hz) {
    if (!(frame_rate_hz > 0)) throw domain_error("frame rate must be > 0");
    RateReport r;
    r.coarse_hz = frame_rate_hz;
    r.mid_hz = 2 * frame_rate_hz;
    r.fine_hz = 4 * frame_rate_hz;
    r.total_hz = 7 * frame_rate_hz;
    return r;
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    char bytes[4] = {
        static_cast<char>(v & 0xFF),
        static_cast<char>((v >> 8) & 0xFF),
        static_cast<char>((v >> 16) & 0xFF),
        static_cast<char>((v >> 24) & 0xFF),
    };
    out.write(bytes, 4);
}

std::uint32_t read_u32_le(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) throw parse_error("truncated frames file: u32 expected");
    return std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) |
           (std::uint32_t(bytes[2]) << 16) | (std::uint32_t(bytes[3]) << 24);
}

void write_frames_header(std::ostream& out, std::uint8_t version, std::uint8_t layers,
                         std::uint32_t length) {
    out.write(kFramesMagic, 4);
    out.put(static_cast<char>(version));
    out.put(static_cast<char>(layers));
    write_u32_le(out, length);
}

FramesHeader read_frames_header(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || !std::equal(magic, magic + 4, kFramesMagic))
        throw parse_error("bad frames file: magic mismatch");
    FramesHeader h;
    int version = in.get();
    int layers = in.get();
    if (version == EOF || layers == EOF) throw parse_error("truncated frames header");
    h.version = static_cast<std::uint8_t>(version);
    h.layers = static_cast<std::uint8_t>(layers);
    h.length = read_u32_le(in);
    if (h.layers == 0) throw parse_error("frames file declares zero layers");
    return h;
}

void write_frames(std::ostream& out, const std::vector<ParallelFrame>& frames,
                  std::uint32_t num_layers) {
    if (num_layers == 0 || num_layers > 255) throw shape_error("layer count must be in 1..255");
    for (const ParallelFrame& frame : frames) check_arity(frame, num_layers, "write_frames");
    write_frames_header(out, kFramesVersionTokens, static_cast<std::uint8_t>(num_layers),
                        static_cast<std::uint32_t>(frames.size()));
    for (const ParallelFrame& frame : frames) {
        write_u32_le(out, frame.text);
        for (token_id id : frame.audio) write_u32_le(out, id);
    }
}

std::vector<ParallelFrame> read_frames(std::istream& in) {
    FramesHeader h = read_frames_header(in);
    if (h.version != kFramesVersionTokens)
        throw parse_error("frames file version " + std::to_string(h.version) +
                          " does not carry token payload");
    std::vector<ParallelFrame> frames(h.length);
    for (auto& frame : frames) {
        frame.text = read_u32_le(in);
        frame.audio.resize(h.layers - 1);
        for (auto& id : frame.audio) id = read_u32_le(in);
    }
    return frames;
}

void save_frames(const std::string& path, const std::vector<ParallelFrame>& frames,
                 std::uint32_t num_layers) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for write: " + path);
    write_frames(out, frames, num_layers);
}

std::vector<ParallelFrame> load_frames(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open frames file: " + path);
    return read_frames(in);
}

} // namespace lucy
