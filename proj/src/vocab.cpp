#include "lucy/vocab.hpp"
#include "lucy/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace lucy {

using nlohmann::json;

std::vector<std::pair<std::string, token_id>> ControlTokenTable::entries() const {
    std::vector<std::pair<std::string, token_id>> out = {
        {"pad_text", pad_text}, {"pad_audio", pad_audio},   {"bos", bos},
        {"eos", eos},           {"turn_end", turn_end},     {"tool_call_open", tool_call_open},
        {"tool_call_close", tool_call_close},
    };
    for (const auto& [label, id] : speaker) out.emplace_back("speaker:" + label, id);
    for (const auto& [label, id] : emotion) out.emplace_back("emotion:" + label, id);
    return out;
}

const std::vector<std::string>& default_emotion_labels() {
    static const std::vector<std::string> labels = {
        "neutral", "happy", "angry", "sad", "fear", "disgust", "surprise", "sorry",
    };
    return labels;
}

void VocabSpec::validate() const {
    if (text_vocab_size == 0) throw config_error("text_vocab_size must be > 0");
    if (audio_vocab_size == 0) throw config_error("audio_vocab_size must be > 0");
    if (num_audio_layers < 1) throw config_error("num_audio_layers must be >= 1");

    std::set<token_id> seen;
    for (const auto& [name, id] : reserved.entries()) {
        if (id >= text_vocab_size)
            throw config_error("reserved token '" + name + "' id " + std::to_string(id) +
                               " outside text vocab of size " + std::to_string(text_vocab_size));
        if (!seen.insert(id).second)
            throw config_error("reserved token '" + name + "' reuses id " + std::to_string(id));
    }
    if (reserved.pad_audio >= audio_vocab_size)
        throw config_error("pad_audio id outside audio vocab");
    if (!reserved.speaker.count("male") || !reserved.speaker.count("female"))
        throw config_error("speaker map must contain 'male' and 'female'");
    if (reserved.emotion.empty()) throw config_error("emotion map must not be empty");

    if (byte_base) {
        if (std::uint64_t(*byte_base) + 256 > text_vocab_size)
            throw config_error("byte range does not fit in text vocab");
        for (const auto& [name, id] : reserved.entries())
            if (id >= *byte_base && id < *byte_base + 256)
                throw config_error("byte range overlaps reserved token '" + name + "'");
    }
}

bool VocabSpec::is_reserved_text_id(token_id id) const {
    for (const auto& [name, rid] : reserved.entries())
        if (rid == id && name != "pad_audio") return true;
    return false;
}

VocabSpec make_harness_vocab(std::uint32_t text_vocab_size, std::uint32_t audio_vocab_size,
                             std::uint32_t num_audio_layers,
                             const std::vector<std::string>& emotions) {
    VocabSpec spec;
    spec.text_vocab_size = text_vocab_size;
    spec.audio_vocab_size = audio_vocab_size;
    spec.num_audio_layers = num_audio_layers;

    token_id next = 0;
    auto take = [&next]() { return next++; };
    spec.reserved.pad_text = take();
    spec.reserved.pad_audio = take();
    spec.reserved.bos = take();
    spec.reserved.eos = take();
    spec.reserved.turn_end = take();
    spec.reserved.speaker["male"] = take();
    spec.reserved.speaker["female"] = take();
    for (const auto& label : emotions) spec.reserved.emotion[label] = take();
    spec.reserved.tool_call_open = take();
    spec.reserved.tool_call_close = take();

    if (std::uint64_t(next) + 256 <= text_vocab_size) spec.byte_base = next;

    spec.validate();
    return spec;
}

TokenClass classify_token(const VocabSpec& spec, std::uint32_t layer, token_id id) {
    if (layer >= spec.num_layers())
        throw range_error("layer " + std::to_string(layer) + " out of range");
    if (layer == 0) {
        if (id >= spec.text_vocab_size)
            throw range_error("text token id " + std::to_string(id) + " out of range");
        if (id == spec.reserved.pad_text) return TokenClass::pad;
        if (spec.is_reserved_text_id(id)) return TokenClass::control;
        return TokenClass::text;
    }
    if (id >= spec.audio_vocab_size)
        throw range_error("audio token id " + std::to_string(id) + " out of range");
    if (id == spec.reserved.pad_audio) return TokenClass::pad;
    return TokenClass::audio;
}

namespace {

token_id map_lookup(const std::map<std::string, token_id>& table, const std::string& label,
                    const char* what) {
    auto it = table.find(label);
    if (it == table.end()) throw lookup_error(std::string(what) + " label not found: " + label);
    return it->second;
}

std::string map_reverse(const std::map<std::string, token_id>& table, token_id id,
                        const char* what) {
    for (const auto& [label, tid] : table)
        if (tid == id) return label;
    throw lookup_error(std::string(what) + " id not found: " + std::to_string(id));
}

} // namespace

token_id emotion_token(const VocabSpec& spec, const std::string& label) {
    return map_lookup(spec.reserved.emotion, label, "emotion");
}

std::string parse_emotion_token(const VocabSpec& spec, token_id id) {
    return map_reverse(spec.reserved.emotion, id, "emotion");
}

token_id speaker_token(const VocabSpec& spec, const std::string& label) {
    return map_lookup(spec.reserved.speaker, label, "speaker");
}

std::string parse_speaker_token(const VocabSpec& spec, token_id id) {
    return map_reverse(spec.reserved.speaker, id, "speaker");
}

std::string vocab_to_json(const VocabSpec& spec) {
    json reserved = {
        {"pad_text", spec.reserved.pad_text},
        {"pad_audio", spec.reserved.pad_audio},
        {"bos", spec.reserved.bos},
        {"eos", spec.reserved.eos},
        {"turn_end", spec.reserved.turn_end},
        {"speaker", spec.reserved.speaker},
        {"emotion", spec.reserved.emotion},
        {"tool_call_open", spec.reserved.tool_call_open},
        {"tool_call_close", spec.reserved.tool_call_close},
    };
    json doc = {
        {"text_vocab_size", spec.text_vocab_size},
        {"audio_vocab_size", spec.audio_vocab_size},
        {"num_audio_layers", spec.num_audio_layers},
        {"reserved", reserved},
    };
    if (spec.byte_base) doc["byte_base"] = *spec.byte_base;
    return doc.dump(2);
}

VocabSpec vocab_from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw parse_error(std::string("invalid vocab json: ") + e.what());
    }
    try {
        VocabSpec spec;
        spec.text_vocab_size = doc.at("text_vocab_size").get<std::uint32_t>();
        spec.audio_vocab_size = doc.at("audio_vocab_size").get<std::uint32_t>();
        spec.num_audio_layers = doc.at("num_audio_layers").get<std::uint32_t>();
        const json& r = doc.at("reserved");
        spec.reserved.pad_text = r.at("pad_text").get<token_id>();
        spec.reserved.pad_audio = r.at("pad_audio").get<token_id>();
        spec.reserved.bos = r.at("bos").get<token_id>();
        spec.reserved.eos = r.at("eos").get<token_id>();
        spec.reserved.turn_end = r.at("turn_end").get<token_id>();
        spec.reserved.speaker = r.at("speaker").get<std::map<std::string, token_id>>();
        spec.reserved.emotion = r.at("emotion").get<std::map<std::string, token_id>>();
        spec.reserved.tool_call_open = r.at("tool_call_open").get<token_id>();
        spec.reserved.tool_call_close = r.at("tool_call_close").get<token_id>();
        if (doc.contains("byte_base")) spec.byte_base = doc.at("byte_base").get<token_id>();
        spec.validate();
        return spec;
    } catch (const json::exception& e) {
        throw parse_error(std::string("vocab json missing field: ") + e.what());
    }
}

void save_vocab(const VocabSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for write: " + path);
    out << vocab_to_json(spec) << "\n";
}

VocabSpec load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open vocab file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return vocab_from_json(buf.str());
}

std::vector<token_id> encode_text(const VocabSpec& spec, std::string_view text) {
    if (!spec.byte_base) throw config_error("vocab has no byte_base; cannot encode text");
    std::vector<token_id> out;
    out.reserve(text.size());
    for (unsigned char c : text) out.push_back(*spec.byte_base + c);
    return out;
}

bool is_byte_token(const VocabSpec& spec, token_id id) {
    return spec.byte_base && id >= *spec.byte_base && id < *spec.byte_base + 256;
}

std::string decode_bytes(const VocabSpec& spec, std::span<const token_id> ids) {
    if (!spec.byte_base) throw config_error("vocab has no byte_base; cannot decode text");
    std::string out;
    out.reserve(ids.size());
    for (token_id id : ids) {
        if (!is_byte_token(spec, id))
            throw parse_error("non-byte token id " + std::to_string(id) + " in byte span");
        out.push_back(static_cast<char>(id - *spec.byte_base));
    }
    return out;
}

std::string render_text(const VocabSpec& spec, std::span<const token_id> ids) {
    std::string out;
    for (token_id id : ids) {
        if (is_byte_token(spec, id)) {
            out.push_back(static_cast<char>(id - *spec.byte_base));
        } else {
            out += "<" + std::to_string(id) + ">";
        }
    }
    return out;
}

} // namespace lucy
