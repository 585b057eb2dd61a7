#include "lucy/frontend.hpp"
#include "lucy/errors.hpp"
#include "lucy/framing.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace lucy {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Reflect an out-of-range index into [0, n) without repeating the edges
// (period 2n-2), matching reflective center padding.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * static_cast<std::ptrdiff_t>(n) - 2;
    std::ptrdiff_t m = i % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - m);
}

} // namespace

void MelConfig::validate() const {
    if (sample_rate <= 0) throw config_error("sample_rate must be positive");
    if (hop <= 0 || window <= hop) throw config_error("window must exceed hop");
    if (n_mels < 1) throw config_error("n_mels must be >= 1");
    if (!is_power_of_two(fft_size) || fft_size < window)
        throw config_error("fft_size must be a power of two >= window");
    if (!(fmax > fmin) || fmax > sample_rate / 2.0)
        throw config_error("mel band must satisfy fmin < fmax <= nyquist");
    if (log_floor <= 0) throw config_error("log_floor must be positive");
}

std::size_t mel_frame_count(std::size_t samples, const MelConfig& cfg) {
    cfg.validate();
    const auto hop = static_cast<std::size_t>(cfg.hop);
    return (samples + hop - 1) / hop;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg) {
    cfg.validate();
    const std::size_t bins = static_cast<std::size_t>(cfg.fft_size) / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);

    // n_mels + 2 edge frequencies, evenly spaced on the mel scale.
    std::vector<double> edges(cfg.n_mels + 2);
    for (int m = 0; m < cfg.n_mels + 2; ++m)
        edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1));

    std::vector<std::vector<double>> bank(cfg.n_mels, std::vector<double>(bins, 0.0));
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
            double w = 0.0;
            if (f > lo && f < hi)
                w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            bank[m][k] = w;
        }
    }
    return bank;
}

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
    const std::size_t n = re.size();
    if (n != im.size() || n == 0 || (n & (n - 1)) != 0)
        throw shape_error("fft size must be a power of two");

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (std::size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::size_t a = i + j, b = i + j + len / 2;
                const double tr = re[b] * cr - im[b] * ci;
                const double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

std::vector<std::vector<float>> mel_spectrogram(std::span<const std::int16_t> pcm,
                                                const MelConfig& cfg) {
    cfg.validate();
    if (pcm.empty()) return {};

    const std::size_t frames = mel_frame_count(pcm.size(), cfg);
    const std::size_t bins = static_cast<std::size_t>(cfg.fft_size) / 2 + 1;
    const auto bank = mel_filterbank(cfg);

    // periodic Hann
    std::vector<double> hann(cfg.window);
    for (int i = 0; i < cfg.window; ++i)
        hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.window);

    std::vector<std::vector<float>> out(frames, std::vector<float>(cfg.n_mels));
    std::vector<double> re(cfg.fft_size), im(cfg.fft_size), power(bins);
    for (std::size_t t = 0; t < frames; ++t) {
        const std::ptrdiff_t center =
            static_cast<std::ptrdiff_t>(t) * cfg.hop + cfg.hop / 2;
        std::fill(re.begin(), re.end(), 0.0);
        std::fill(im.begin(), im.end(), 0.0);
        for (int i = 0; i < cfg.window; ++i) {
            const std::ptrdiff_t src = center - cfg.window / 2 + i;
            re[i] = pcm[reflect_index(src, pcm.size())] / 32768.0 * hann[i];
        }
        fft_radix2(re, im);
        for (std::size_t k = 0; k < bins; ++k) power[k] = re[k] * re[k] + im[k] * im[k];
        for (int m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            for (std::size_t k = 0; k < bins; ++k) e += bank[m][k] * power[k];
            out[t][m] = static_cast<float>(std::log(std::max(e, cfg.log_floor)));
        }
    }
    return out;
}

ChainShapes chain_shapes(std::size_t mel_frames, const FeatureChain& chain) {
    if (chain.encoder_downsample <= 0 || chain.adapter_downsample <= 0)
        throw config_error("downsample factors must be positive");
    ChainShapes s;
    s.encoder_frames = mel_frames / static_cast<std::size_t>(chain.encoder_downsample);
    s.adapter_frames = s.encoder_frames / static_cast<std::size_t>(chain.adapter_downsample);
    return s;
}

double adapter_rate_hz(const MelConfig& cfg, const FeatureChain& chain) {
    cfg.validate();
    return static_cast<double>(cfg.sample_rate) /
           (static_cast<double>(cfg.hop) * chain.encoder_downsample * chain.adapter_downsample);
}

std::vector<std::vector<float>> EncoderStub::encode(
        const std::vector<std::vector<float>>& mel) const {
    const std::size_t factor = static_cast<std::size_t>(chain.encoder_downsample);
    const std::size_t out_frames = mel.size() / factor;
    const std::size_t dim = static_cast<std::size_t>(chain.encoder_dim);
    std::vector<std::vector<float>> out(out_frames, std::vector<float>(dim, 0.0f));
    if (out_frames == 0) return out;
    const std::size_t n_mels = mel[0].size();
    if (n_mels == 0) throw shape_error("mel rows must be non-empty");
    for (const auto& row : mel)
        if (row.size() != n_mels) throw shape_error("ragged mel matrix");
    for (std::size_t t = 0; t < out_frames; ++t) {
        for (std::size_t j = 0; j < dim; ++j) {
            // mean-pool the window, cycling the mel bins across the wider dim
            double acc = 0.0;
            for (std::size_t i = 0; i < factor; ++i)
                acc += mel[t * factor + i][j % n_mels];
            out[t][j] = static_cast<float>(acc / static_cast<double>(factor));
        }
    }
    return out;
}

std::vector<std::vector<float>> EncoderStub::adapt(
        const std::vector<std::vector<float>>& enc) const {
    const std::size_t factor = static_cast<std::size_t>(chain.adapter_downsample);
    const std::size_t dim = static_cast<std::size_t>(chain.encoder_dim);
    for (const auto& row : enc)
        if (row.size() != dim) throw shape_error("adapter input dim mismatch");
    const std::size_t out_frames = enc.size() / factor;
    std::vector<std::vector<float>> out(out_frames, std::vector<float>(dim, 0.0f));
    for (std::size_t t = 0; t < out_frames; ++t)
        for (std::size_t j = 0; j < dim; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < factor; ++i) acc += enc[t * factor + i][j];
            out[t][j] = static_cast<float>(acc / static_cast<double>(factor));
        }
    return out;
}

// ---- WAV io ----

namespace {

std::uint32_t read_le32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw data_error("truncated wav header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_le16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) throw data_error("truncated wav header");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_le32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void write_le16(std::ostream& out, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

} // namespace

WavData read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open wav file: " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw data_error("not a RIFF file: " + path);
    read_le32(in); // riff size, unused
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw data_error("not a WAVE file: " + path);

    WavData wav;
    bool have_fmt = false;
    while (in.read(tag, 4)) {
        const std::uint32_t chunk_size = read_le32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            const std::uint16_t format = read_le16(in);
            const std::uint16_t channels = read_le16(in);
            wav.sample_rate = static_cast<int>(read_le32(in));
            read_le32(in); // byte rate
            read_le16(in); // block align
            const std::uint16_t bits = read_le16(in);
            if (format != 1 || bits != 16) throw data_error("wav must be 16-bit PCM");
            if (channels != 1) throw data_error("wav must be mono");
            if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw data_error("wav data chunk before fmt chunk");
            wav.samples.resize(chunk_size / 2);
            std::vector<unsigned char> raw(chunk_size);
            in.read(reinterpret_cast<char*>(raw.data()), chunk_size);
            if (!in) throw data_error("truncated wav data chunk");
            for (std::size_t i = 0; i < wav.samples.size(); ++i)
                wav.samples[i] =
                    static_cast<std::int16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
            return wav;
        } else {
            in.seekg(chunk_size + (chunk_size & 1), std::ios::cur); // chunks are word-aligned
        }
    }
    throw data_error("wav file has no data chunk: " + path);
}

void write_wav(const std::string& path, const WavData& wav) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write wav file: " + path);
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(wav.samples.size() * 2);
    out.write("RIFF", 4);
    write_le32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_le32(out, 16);
    write_le16(out, 1); // PCM
    write_le16(out, 1); // mono
    write_le32(out, static_cast<std::uint32_t>(wav.sample_rate));
    write_le32(out, static_cast<std::uint32_t>(wav.sample_rate * 2));
    write_le16(out, 2);
    write_le16(out, 16);
    out.write("data", 4);
    write_le32(out, data_bytes);
    for (std::int16_t s : wav.samples)
        write_le16(out, static_cast<std::uint16_t>(s));
    if (!out) throw data_error("failed writing wav file: " + path);
}

// ---- feature files ----

void save_features(const std::string& path, const std::vector<std::vector<float>>& feats) {
    const std::size_t dim = feats.empty() ? 1 : feats[0].size();
    if (dim == 0 || dim > 255) throw shape_error("feature dimension must be 1..255");
    for (const auto& row : feats)
        if (row.size() != dim) throw shape_error("ragged feature matrix");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write feature file: " + path);
    write_frames_header(out, kFramesVersionFeatures, static_cast<std::uint8_t>(dim),
                        static_cast<std::uint32_t>(feats.size()));
    static_assert(sizeof(float) == 4);
    for (const auto& row : feats)
        for (float v : row) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            write_u32_le(out, bits);
        }
    if (!out) throw data_error("failed writing feature file: " + path);
}

std::vector<std::vector<float>> load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open feature file: " + path);
    const FramesHeader header = read_frames_header(in);
    if (header.version != kFramesVersionFeatures)
        throw data_error("not a feature file (wrong version byte)");
    std::vector<std::vector<float>> feats(header.length, std::vector<float>(header.layers));
    for (auto& row : feats)
        for (float& v : row) {
            const std::uint32_t bits = read_u32_le(in);
            std::memcpy(&v, &bits, 4);
        }
    return feats;
}

} // namespace lucy
