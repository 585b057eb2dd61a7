#include "lucy/wire.hpp"
#include "lucy/errors.hpp"

namespace lucy {

using nlohmann::json;

const char* wire_type_name(WireType t) {
    switch (t) {
        case WireType::audio_chunk: return "audio_chunk";
        case WireType::text_delta: return "text_delta";
        case WireType::emotion: return "emotion";
        case WireType::tool_call: return "tool_call";
        case WireType::end: return "end";
        case WireType::error: return "error";
    }
    return "end";
}

WireType wire_type_from_name(const std::string& name) {
    if (name == "audio_chunk") return WireType::audio_chunk;
    if (name == "text_delta") return WireType::text_delta;
    if (name == "emotion") return WireType::emotion;
    if (name == "tool_call") return WireType::tool_call;
    if (name == "end") return WireType::end;
    if (name == "error") return WireType::error;
    throw parse_error("unknown wire message type: " + name);
}

json wire_to_json(const WireMessage& msg) {
    json doc{{"type", wire_type_name(msg.type)}};
    if (msg.text) doc["text"] = *msg.text;
    if (msg.label) doc["label"] = *msg.label;
    if (msg.pcm) doc["pcm"] = *msg.pcm;
    if (msg.frames) doc["frames"] = *msg.frames;
    if (msg.name) doc["name"] = *msg.name;
    if (msg.arguments) doc["arguments"] = *msg.arguments;
    if (msg.reason) doc["reason"] = *msg.reason;
    if (msg.detail) doc["detail"] = *msg.detail;
    if (msg.message) doc["message"] = *msg.message;
    return doc;
}

WireMessage wire_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string())
        throw parse_error("wire message must be an object with a string type");
    WireMessage msg;
    msg.type = wire_type_from_name(doc["type"].get<std::string>());
    auto take_string = [&](const char* key) -> std::optional<std::string> {
        if (!doc.contains(key)) return std::nullopt;
        if (!doc[key].is_string()) throw parse_error(std::string(key) + " must be a string");
        return doc[key].get<std::string>();
    };
    msg.text = take_string("text");
    msg.label = take_string("label");
    msg.pcm = take_string("pcm");
    if (doc.contains("frames")) {
        if (!doc["frames"].is_number_unsigned())
            throw parse_error("frames must be a non-negative integer");
        msg.frames = doc["frames"].get<std::uint32_t>();
    }
    msg.name = take_string("name");
    if (doc.contains("arguments")) {
        if (!doc["arguments"].is_object()) throw parse_error("arguments must be an object");
        msg.arguments = doc["arguments"];
    }
    msg.reason = take_string("reason");
    msg.detail = take_string("detail");
    msg.message = take_string("message");
    return msg;
}

std::string encode_wire(const WireMessage& msg) {
    return wire_to_json(msg).dump() + "\n";
}

WireMessage decode_wire(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
        line.remove_suffix(1);
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::exception& e) {
        throw parse_error(std::string("wire line is not json: ") + e.what(),
                          std::string(line));
    }
    return wire_from_json(doc);
}

WireMessage make_text_delta(std::string text) {
    WireMessage msg;
    msg.type = WireType::text_delta;
    msg.text = std::move(text);
    return msg;
}

WireMessage make_emotion(std::string label) {
    WireMessage msg;
    msg.type = WireType::emotion;
    msg.label = std::move(label);
    return msg;
}

WireMessage make_audio_chunk(std::span<const std::int16_t> pcm_samples,
                             std::uint32_t frame_count) {
    WireMessage msg;
    msg.type = WireType::audio_chunk;
    msg.pcm = pcm16_to_base64(pcm_samples);
    msg.frames = frame_count;
    return msg;
}

WireMessage make_tool_call(std::string name, json arguments) {
    WireMessage msg;
    msg.type = WireType::tool_call;
    msg.name = std::move(name);
    msg.arguments = std::move(arguments);
    return msg;
}

WireMessage make_end(std::string reason, std::optional<std::string> detail) {
    WireMessage msg;
    msg.type = WireType::end;
    msg.reason = std::move(reason);
    msg.detail = std::move(detail);
    return msg;
}

WireMessage make_error(std::string message, std::optional<std::string> detail) {
    WireMessage msg;
    msg.type = WireType::error;
    msg.message = std::move(message);
    msg.detail = std::move(detail);
    return msg;
}

// ---- base64 ----

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

} // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kB64Alphabet[(n >> 18) & 0x3f]);
        out.push_back(kB64Alphabet[(n >> 12) & 0x3f]);
        out.push_back(kB64Alphabet[(n >> 6) & 0x3f]);
        out.push_back(kB64Alphabet[n & 0x3f]);
    }
    if (i + 1 == bytes.size()) {
        const std::uint32_t n = bytes[i] << 16;
        out.push_back(kB64Alphabet[(n >> 18) & 0x3f]);
        out.push_back(kB64Alphabet[(n >> 12) & 0x3f]);
        out.append("==");
    } else if (i + 2 == bytes.size()) {
        const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kB64Alphabet[(n >> 18) & 0x3f]);
        out.push_back(kB64Alphabet[(n >> 12) & 0x3f]);
        out.push_back(kB64Alphabet[(n >> 6) & 0x3f]);
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw parse_error("base64 length must be a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=') {
                // padding only in the last two slots of the final group
                if (i + 4 != text.size() || k < 2) throw parse_error("misplaced base64 padding");
                vals[k] = 0;
                ++pad;
            } else {
                if (pad > 0) throw parse_error("base64 data after padding");
                vals[k] = b64_value(c);
                if (vals[k] < 0) throw parse_error("invalid base64 character");
            }
        }
        const std::uint32_t n = (static_cast<std::uint32_t>(vals[0]) << 18) |
                                (static_cast<std::uint32_t>(vals[1]) << 12) |
                                (static_cast<std::uint32_t>(vals[2]) << 6) |
                                static_cast<std::uint32_t>(vals[3]);
        out.push_back(static_cast<std::uint8_t>((n >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((n >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(n & 0xff));
    }
    return out;
}

std::string pcm16_to_base64(std::span<const std::int16_t> samples) {
    std::vector<std::uint8_t> bytes(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto u = static_cast<std::uint16_t>(samples[i]);
        bytes[2 * i] = static_cast<std::uint8_t>(u & 0xff);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(u >> 8);
    }
    return base64_encode(bytes);
}

std::vector<std::int16_t> base64_to_pcm16(std::string_view text) {
    const std::vector<std::uint8_t> bytes = base64_decode(text);
    if (bytes.size() % 2 != 0) throw parse_error("pcm16 payload has odd byte count");
    std::vector<std::int16_t> samples(bytes.size() / 2);
    for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = static_cast<std::int16_t>(
            static_cast<std::uint16_t>(bytes[2 * i]) |
            (static_cast<std::uint16_t>(bytes[2 * i + 1]) << 8));
    return samples;
}

// ---- placeholder audio ----

std::vector<std::int16_t> placeholder_pcm(std::span<const std::vector<token_id>> frames,
                                          int samples_per_frame) {
    if (samples_per_frame <= 0) throw config_error("samples_per_frame must be positive");
    std::vector<std::int16_t> pcm;
    pcm.reserve(frames.size() * static_cast<std::size_t>(samples_per_frame));
    for (const auto& frame : frames) {
        const token_id coarse = frame.empty() ? 0 : frame[0];
        // xorshift* stream seeded by the coarse token: fixed pattern per token
        std::uint64_t state = 0x9e3779b97f4a7c15ull ^
                              (static_cast<std::uint64_t>(coarse) * 0xbf58476d1ce4e5b9ull);
        if (state == 0) state = 1;
        for (int i = 0; i < samples_per_frame; ++i) {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            const std::uint64_t mixed = state * 0x2545f4914f6cdd1dull;
            pcm.push_back(static_cast<std::int16_t>(mixed >> 48));
        }
    }
    return pcm;
}

} // namespace lucy
