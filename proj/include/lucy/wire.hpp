// Newline-delimited JSON wire protocol: message schema, base64 PCM16
// payloads, and the deterministic placeholder waveform for token frames.
#pragma once

#include "lucy/vocab.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lucy {

enum class WireType { audio_chunk, text_delta, emotion, tool_call, end, error };

const char* wire_type_name(WireType t);
WireType wire_type_from_name(const std::string& name); // parse_error on unknown

// One protocol message. Only the fields for the given type are serialized;
// key order on the wire is alphabetical, so encoding is deterministic.
struct WireMessage {
    WireType type = WireType::end;
    std::optional<std::string> text;             // text_delta
    std::optional<std::string> label;            // emotion; client end (gate label)
    std::optional<std::string> pcm;              // audio_chunk, base64 PCM16 LE
    std::optional<std::uint32_t> frames;         // audio_chunk frame count
    std::optional<std::string> name;             // tool_call
    std::optional<nlohmann::json> arguments;     // tool_call
    std::optional<std::string> reason;           // end: ok | truncated | gated_out
    std::optional<std::string> detail;           // end/error extra context
    std::optional<std::string> message;          // error

    bool operator==(const WireMessage&) const = default;
};

nlohmann::json wire_to_json(const WireMessage& msg);
WireMessage wire_from_json(const nlohmann::json& doc); // parse_error

std::string encode_wire(const WireMessage& msg);    // single line, '\n' terminated
WireMessage decode_wire(std::string_view line);     // tolerates the trailing '\n'

// factories for the message variants the server emits
WireMessage make_text_delta(std::string text);
WireMessage make_emotion(std::string label);
WireMessage make_audio_chunk(std::span<const std::int16_t> pcm_samples,
                             std::uint32_t frame_count);
WireMessage make_tool_call(std::string name, nlohmann::json arguments);
WireMessage make_end(std::string reason, std::optional<std::string> detail = std::nullopt);
WireMessage make_error(std::string message, std::optional<std::string> detail = std::nullopt);

// ---- base64 (standard alphabet, '=' padding) ----

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text); // parse_error

std::string pcm16_to_base64(std::span<const std::int16_t> samples); // little-endian
std::vector<std::int16_t> base64_to_pcm16(std::string_view text);   // parse_error on odd size

// ---- placeholder audio ----
// No vocoder exists: each token frame becomes a fixed-length PCM16 pattern
// keyed by its coarse (first-layer) token, so chunk sizes and byte content
// are deterministic functions of the token stream.

inline constexpr int kDefaultSamplesPerFrame = 1365; // ~16000 / (82/7) Hz

std::vector<std::int16_t> placeholder_pcm(std::span<const std::vector<token_id>> frames,
                                          int samples_per_frame = kDefaultSamplesPerFrame);

} // namespace lucy
