// Canonical scripted server exchange shared by the golden-transcript checks:
// three queries (voiced reply, gated statement, tool call + continuation)
// over a fixed script list, so the NDJSON output is a deterministic byte
// stream suitable for byte-for-byte comparison.
#pragma once

#include "lucy/errors.hpp"
#include "lucy/server.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lucy::testing {

inline std::vector<token_id> byte_tokens(const VocabSpec& vocab, std::string_view text) {
    std::vector<token_id> out;
    out.reserve(text.size());
    for (unsigned char c : text) out.push_back(*vocab.byte_base + c);
    return out;
}

// fixed text with a cheap deterministic non-pad audio pattern per layer
inline ParallelSequence scripted_reply(const VocabSpec& vocab,
                                       const std::vector<token_id>& text_tokens,
                                       std::uint64_t salt) {
    ParallelSequence seq;
    seq.frames.resize(text_tokens.size());
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        seq.frames[i].text = text_tokens[i];
        seq.frames[i].audio.resize(vocab.num_audio_layers);
        for (std::uint32_t k = 0; k < vocab.num_audio_layers; ++k)
            seq.frames[i].audio[k] =
                2 + static_cast<token_id>((salt + i * 7 + k * 3) % 60);
    }
    return seq;
}

inline std::vector<std::string> golden_client_lines() {
    const std::vector<std::int16_t> pcm = {100, -100, 200, -200};
    return {
        encode_wire(make_audio_chunk(pcm, 1)),
        "{\"label\":\"question\",\"type\":\"end\"}\n",
        encode_wire(make_audio_chunk(pcm, 1)),
        "{\"label\":\"noise\",\"type\":\"end\"}\n",
        encode_wire(make_audio_chunk(pcm, 1)),
        "{\"label\":\"question\",\"type\":\"end\"}\n",
    };
}

// Runs the canonical exchange through handle_session and returns every byte
// the server wrote, in order.
inline std::string run_golden_session(std::function<void(char)> probe = {}) {
    const VocabSpec vocab = make_harness_vocab();
    const DelayPattern pattern = DelayPattern::cumulative(vocab.num_layers());

    auto grids = std::make_shared<std::vector<DelayedGrid>>();
    auto add = [&](const std::vector<token_id>& text, std::uint64_t salt) {
        grids->push_back(apply_delay(scripted_reply(vocab, text, salt), pattern,
                                     vocab.reserved.pad_text, vocab.reserved.pad_audio));
    };

    std::vector<token_id> reply = {vocab.reserved.emotion.at("happy")};
    const auto hi = byte_tokens(vocab, "hi there");
    reply.insert(reply.end(), hi.begin(), hi.end());
    add(reply, 0);

    add(byte_tokens(vocab, "x"), 1); // consumed by the gated query, never decoded

    std::vector<token_id> tool = byte_tokens(vocab, "let me check ");
    tool.push_back(vocab.reserved.tool_call_open);
    const auto payload =
        byte_tokens(vocab, R"({"name":"web_search","arguments":{"query":"rain"}})");
    tool.insert(tool.end(), payload.begin(), payload.end());
    tool.push_back(vocab.reserved.tool_call_close);
    add(tool, 2);

    add(byte_tokens(vocab, "rain is coming"), 3);

    auto cursor = std::make_shared<std::size_t>(0);
    ServeConfig cfg;
    cfg.vocab = &vocab;
    cfg.pattern = pattern;
    cfg.chunk_frames = 2;
    cfg.samples_per_frame = 16;
    cfg.make_predictor = [grids, cursor, &vocab]() -> std::unique_ptr<Predictor> {
        if (*cursor >= grids->size()) throw state_error("golden script list exhausted");
        return std::make_unique<ScriptedPredictor>(vocab, (*grids)[(*cursor)++]);
    };
    cfg.io_probe = std::move(probe);

    const std::vector<std::string> input = golden_client_lines();
    std::size_t next = 0;
    std::string transcript;
    WireChannel channel;
    channel.read_line = [&](std::string& line) {
        if (next >= input.size()) return false;
        line = input[next++];
        return true;
    };
    channel.write_line = [&](std::string_view bytes) { transcript.append(bytes); };

    handle_session(cfg, channel);
    return transcript;
}

} // namespace lucy::testing
