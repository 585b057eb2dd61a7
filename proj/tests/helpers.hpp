// Shared test helpers: seeded random token sequences and self-cleaning
// temp files.
#pragma once

#include "lucy/framing.hpp"
#include "lucy/vocab.hpp"

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace lucy::testing {

inline ParallelSequence random_sequence(std::mt19937_64& rng, std::size_t length,
                                        std::uint32_t num_audio_layers,
                                        std::uint32_t text_vocab = 512,
                                        std::uint32_t audio_vocab = 64) {
    ParallelSequence seq;
    seq.frames.resize(length);
    for (auto& frame : seq.frames) {
        frame.text = static_cast<token_id>(rng() % text_vocab);
        frame.audio.resize(num_audio_layers);
        for (auto& a : frame.audio) a = static_cast<token_id>(rng() % audio_vocab);
    }
    return seq;
}

struct TempFile {
    std::filesystem::path path;

    explicit TempFile(const std::string& stem) {
        static std::atomic<unsigned> counter{0};
        path = std::filesystem::temp_directory_path() /
               (stem + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
    }
    ~TempFile() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
    std::string str() const { return path.string(); }

    void write(const std::string& content) const {
        std::ofstream out(path, std::ios::binary);
        out << content;
    }
    std::string read() const {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }
};

} // namespace lucy::testing
