// Audio frontend: log-mel extraction and the 100 -> 25 -> 12.5 Hz feature
// rate chain, plus WAV and feature-file io.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lucy {

struct MelConfig {
    int sample_rate = 16000;
    int window = 400; // 25 ms
    int hop = 160;    // 10 ms
    int n_mels = 80;
    int fft_size = 512; // power of two >= window
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1e-10;

    void validate() const;
};

// ceil(samples / hop): frame count under reflective center padding.
std::size_t mel_frame_count(std::size_t samples, const MelConfig& cfg);

// [frames x n_mels] natural-log mel energies. Frame t is centered at
// t*hop + hop/2; out-of-range samples reflect around the signal edges.
std::vector<std::vector<float>> mel_spectrogram(std::span<const std::int16_t> pcm,
                                                const MelConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular HTK-mel filters over FFT bins 0..fft_size/2, [n_mels][bins].
std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg);

// In-place radix-2 FFT over interleaved re/im pairs; size must be a power of two.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

struct FeatureChain {
    int encoder_downsample = 4;
    int adapter_downsample = 2;
    int encoder_dim = 1024; // shape contract only
};

struct ChainShapes {
    std::size_t encoder_frames = 0;
    std::size_t adapter_frames = 0;

    bool operator==(const ChainShapes&) const = default;
};

// floor(mel/4) then floor(encoder/2).
ChainShapes chain_shapes(std::size_t mel_frames, const FeatureChain& chain);

// sample_rate / (hop * encoder_downsample * adapter_downsample); 12.5 by default.
double adapter_rate_hz(const MelConfig& cfg, const FeatureChain& chain);

// Stand-in for the learned encoder/adapter: deterministic pooling that only
// guarantees the output shapes of the real stack.
struct EncoderStub {
    FeatureChain chain;

    // [T x n_mels] -> [floor(T/4) x encoder_dim]
    std::vector<std::vector<float>> encode(const std::vector<std::vector<float>>& mel) const;
    // [E x encoder_dim] -> [floor(E/2) x encoder_dim]
    std::vector<std::vector<float>> adapt(const std::vector<std::vector<float>>& enc) const;
};

// WAV io: PCM16 mono only; unknown RIFF chunks are skipped.
struct WavData {
    int sample_rate = 16000;
    std::vector<std::int16_t> samples;
};

WavData read_wav(const std::string& path);
void write_wav(const std::string& path, const WavData& wav);

// Feature matrices in the framed binary container (version 2, f32 LE payload,
// layer count = feature dimension).
void save_features(const std::string& path, const std::vector<std::vector<float>>& feats);
std::vector<std::vector<float>> load_features(const std::string& path);

} // namespace lucy
