// Joint token spaces: one text vocabulary plus N audio codebook vocabularies,
// with all reserved control tokens (pads, eos, speaker, emotion, tool markers).
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lucy {

using token_id = std::uint32_t;

enum class TokenClass { text, audio, control, pad };

// Reserved ids. All live in the text layer's id space except pad_audio,
// which is the single reserved id of every audio layer.
struct ControlTokenTable {
    token_id pad_text = 0;
    token_id pad_audio = 0;
    token_id bos = 0;
    token_id eos = 0;
    token_id turn_end = 0;
    std::map<std::string, token_id> speaker;
    std::map<std::string, token_id> emotion;
    token_id tool_call_open = 0;
    token_id tool_call_close = 0;

    // Every reserved id with a stable display name, for uniqueness checks.
    std::vector<std::pair<std::string, token_id>> entries() const;
};

// The 8 emotion labels used when no explicit set is configured.
const std::vector<std::string>& default_emotion_labels();

struct VocabSpec {
    std::uint32_t text_vocab_size = 0;
    std::uint32_t audio_vocab_size = 0;
    std::uint32_t num_audio_layers = 7;
    ControlTokenTable reserved;
    // First of 256 consecutive plain-text ids that carry literal bytes.
    // Optional: only needed where token streams must render to strings
    // (tool-call payloads, wire text). Must not overlap reserved ids.
    std::optional<token_id> byte_base;

    // Total layer count including the text layer.
    std::uint32_t num_layers() const { return 1 + num_audio_layers; }

    // Throws config_error on any violated invariant.
    void validate() const;

    bool is_reserved_text_id(token_id id) const;
};

// Builds a spec with the canonical reserved-table layout. The emotion set
// defaults to default_emotion_labels(). byte_base is assigned right after
// the reserved block when the text vocab has room for 256 byte ids.
VocabSpec make_harness_vocab(std::uint32_t text_vocab_size = 512,
                             std::uint32_t audio_vocab_size = 64,
                             std::uint32_t num_audio_layers = 7,
                             const std::vector<std::string>& emotions = default_emotion_labels());

// Deterministic partition of (layer, id) into exactly one class.
// Layer 0 is the text layer; 1..num_audio_layers are audio layers.
TokenClass classify_token(const VocabSpec& spec, std::uint32_t layer, token_id id);

token_id emotion_token(const VocabSpec& spec, const std::string& label);
std::string parse_emotion_token(const VocabSpec& spec, token_id id);
token_id speaker_token(const VocabSpec& spec, const std::string& label);
std::string parse_speaker_token(const VocabSpec& spec, token_id id);

// vocab.json round trip.
std::string vocab_to_json(const VocabSpec& spec);
VocabSpec vocab_from_json(const std::string& json_text);
void save_vocab(const VocabSpec& spec, const std::string& path);
VocabSpec load_vocab(const std::string& path);

// Byte-level text codec over the byte_base range. encode/decode_bytes are
// strict (throw without byte_base or on out-of-range ids); render_text maps
// non-byte ids to "<id>" placeholders so any stream stays printable.
std::vector<token_id> encode_text(const VocabSpec& spec, std::string_view text);
std::string decode_bytes(const VocabSpec& spec, std::span<const token_id> ids);
std::string render_text(const VocabSpec& spec, std::span<const token_id> ids);
bool is_byte_token(const VocabSpec& spec, token_id id);

} // namespace lucy
