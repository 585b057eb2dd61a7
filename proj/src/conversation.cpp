#include "lucy/conversation.hpp"
#include "lucy/errors.hpp"

#include <json.hpp>

#include <sstream>

namespace lucy {

using nlohmann::json;

const char* role_name(Role r) {
    switch (r) {
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "user";
}

const char* modality_name(Modality m) {
    return m == Modality::text ? "text" : "speech";
}

Role role_from_name(const std::string& name) {
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    if (name == "tool") return Role::tool;
    throw parse_error("unknown role: " + name);
}

Modality modality_from_name(const std::string& name) {
    if (name == "text") return Modality::text;
    if (name == "speech") return Modality::speech;
    throw parse_error("unknown modality: " + name);
}

ConversationState::ConversationState(const VocabSpec& vocab, std::string active_speaker,
                                     std::size_t max_rounds)
    : vocab_(&vocab), active_speaker_(std::move(active_speaker)), max_rounds_(max_rounds) {
    speaker_token(vocab, active_speaker_); // reject unknown speakers up front
}

void ConversationState::set_active_speaker(std::string speaker) {
    speaker_token(*vocab_, speaker);
    active_speaker_ = std::move(speaker);
}

void ConversationState::push_user_text(std::vector<token_id> text_tokens,
                                       std::optional<std::string> emotion) {
    if (!turns_.empty() && turns_.back().role == Role::user)
        throw state_error("previous user turn is still unanswered");
    Turn turn;
    turn.role = Role::user;
    turn.modality = Modality::text;
    turn.text_tokens = std::move(text_tokens);
    turn.emotion = std::move(emotion);
    turns_.push_back(std::move(turn));
}

void ConversationState::push_user_speech(std::string audio_handle,
                                         std::optional<std::string> emotion) {
    if (!turns_.empty() && turns_.back().role == Role::user)
        throw state_error("previous user turn is still unanswered");
    Turn turn;
    turn.role = Role::user;
    turn.modality = Modality::speech;
    turn.audio_handle = std::move(audio_handle);
    turn.emotion = std::move(emotion);
    turns_.push_back(std::move(turn));
}

void ConversationState::push_tool_text(std::vector<token_id> payload_tokens) {
    if (turns_.empty() || turns_.back().role != Role::assistant)
        throw state_error("tool turn must follow an assistant turn");
    Turn turn;
    turn.role = Role::tool;
    turn.modality = Modality::text;
    turn.text_tokens = std::move(payload_tokens);
    turns_.push_back(std::move(turn));
}

std::vector<std::vector<token_id>> ConversationState::commit_response(
        std::vector<token_id> text_tokens, std::vector<std::vector<token_id>> audio_frames,
        std::optional<std::string> emotion) {
    Turn turn;
    turn.role = Role::assistant;
    turn.modality = Modality::text; // history keeps the text version only
    turn.text_tokens = std::move(text_tokens);
    turn.emotion = std::move(emotion);
    turn.speaker = active_speaker_;
    turns_.push_back(std::move(turn));
    drop_old_rounds();
    return audio_frames; // back to the caller, never stored
}

void ConversationState::drop_old_rounds() {
    if (max_rounds_ == 0) return;
    // A round starts at each user turn.
    while (true) {
        std::size_t rounds = 0;
        for (const Turn& t : turns_)
            if (t.role == Role::user) ++rounds;
        if (rounds <= max_rounds_) break;
        // Drop the oldest round: the first user turn and everything up to
        // (not including) the next user turn.
        std::size_t end = 1;
        while (end < turns_.size() && turns_[end].role != Role::user) ++end;
        turns_.erase(turns_.begin(), turns_.begin() + end);
    }
}

SerializedPrompt ConversationState::serialize_prompt() const {
    if (turns_.empty()) throw state_error("cannot serialize an empty conversation");
    const Role tail = turns_.back().role;
    if (tail != Role::user && tail != Role::tool)
        throw state_error("prompt requires a pending user or tool turn at the tail");

    SerializedPrompt out;
    const ControlTokenTable& ct = vocab_->reserved;
    for (const Turn& turn : turns_) {
        switch (turn.role) {
            case Role::user:
                if (turn.modality == Modality::speech) {
                    out.attachments.push_back({out.tokens.size(), turn.audio_handle.value_or("")});
                    out.tokens.push_back(ct.pad_text); // placeholder bound by the attachment
                } else {
                    out.tokens.insert(out.tokens.end(), turn.text_tokens.begin(),
                                      turn.text_tokens.end());
                }
                break;
            case Role::assistant:
            case Role::tool:
                out.tokens.push_back(ct.turn_end);
                out.tokens.insert(out.tokens.end(), turn.text_tokens.begin(),
                                  turn.text_tokens.end());
                out.tokens.push_back(ct.turn_end);
                break;
        }
    }
    out.tokens.push_back(speaker_token(*vocab_, active_speaker_));
    return out;
}

std::vector<token_id> ConversationState::begin_response(
        const std::optional<std::string>& emotion) const {
    if (!emotion) return {};
    return {emotion_token(*vocab_, *emotion)};
}

std::string turns_to_jsonl(const std::vector<Turn>& turns) {
    std::ostringstream out;
    for (const Turn& turn : turns) {
        json line = {
            {"role", role_name(turn.role)},
            {"modality", modality_name(turn.modality)},
            {"text", turn.text_tokens},
            {"emotion", turn.emotion ? json(*turn.emotion) : json(nullptr)},
            {"speaker", turn.speaker ? json(*turn.speaker) : json(nullptr)},
        };
        if (turn.audio_handle) line["audio_handle"] = *turn.audio_handle;
        out << line.dump() << "\n";
    }
    return out.str();
}

std::vector<Turn> turns_from_jsonl(const std::string& text) {
    std::vector<Turn> turns;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
            Turn turn;
            turn.role = role_from_name(doc.at("role").get<std::string>());
            turn.modality = modality_from_name(doc.at("modality").get<std::string>());
            turn.text_tokens = doc.at("text").get<std::vector<token_id>>();
            if (doc.contains("emotion") && !doc["emotion"].is_null())
                turn.emotion = doc["emotion"].get<std::string>();
            if (doc.contains("speaker") && !doc["speaker"].is_null())
                turn.speaker = doc["speaker"].get<std::string>();
            if (doc.contains("audio_handle") && !doc["audio_handle"].is_null())
                turn.audio_handle = doc["audio_handle"].get<std::string>();
            turns.push_back(std::move(turn));
        } catch (const json::exception& e) {
            throw parse_error("turn jsonl line " + std::to_string(line_no) + ": " + e.what(),
                              line);
        }
    }
    return turns;
}

} // namespace lucy
