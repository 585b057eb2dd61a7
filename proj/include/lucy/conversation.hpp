// Multi-round conversation state and the model-facing prompt layout.
// Assistant history is text-only; speech responses are handed back to the
// caller and never stored.
#pragma once

#include "lucy/framing.hpp"
#include "lucy/vocab.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lucy {

enum class Role { user, assistant, tool };
enum class Modality { text, speech };

const char* role_name(Role r);
const char* modality_name(Modality m);
Role role_from_name(const std::string& name);
Modality modality_from_name(const std::string& name);

struct Turn {
    Role role = Role::user;
    Modality modality = Modality::text;
    std::vector<token_id> text_tokens;
    std::optional<std::string> audio_handle; // opaque reference to input speech features
    std::optional<std::string> emotion;
    std::optional<std::string> speaker;

    bool operator==(const Turn&) const = default;
};

// A speech query renders as one placeholder token in the text stream; the
// attachment binds that position to the query's feature handle.
struct Attachment {
    std::size_t position = 0;
    std::string handle;

    bool operator==(const Attachment&) const = default;
};

struct SerializedPrompt {
    std::vector<token_id> tokens;
    std::vector<Attachment> attachments;

    bool operator==(const SerializedPrompt&) const = default;
};

class ConversationState {
public:
    ConversationState(const VocabSpec& vocab, std::string active_speaker,
                      std::size_t max_rounds = 0); // 0 = unlimited

    void push_user_text(std::vector<token_id> text_tokens,
                        std::optional<std::string> emotion = std::nullopt);
    void push_user_speech(std::string audio_handle,
                          std::optional<std::string> emotion = std::nullopt);
    void push_tool_text(std::vector<token_id> payload_tokens);

    // Appends a text-only assistant turn; the audio frames (one audio-layer
    // token stack per frame) pass straight through and are never retained.
    std::vector<std::vector<token_id>> commit_response(
        std::vector<token_id> text_tokens, std::vector<std::vector<token_id>> audio_frames,
        std::optional<std::string> emotion = std::nullopt);

    // Token context for the next response: turns in order (user content bare,
    // assistant/tool content wrapped in turn_end), then the speaker token.
    // Requires a user or tool turn at the tail.
    SerializedPrompt serialize_prompt() const;

    // Forced-emotion response prefix; empty when the model should predict it.
    std::vector<token_id> begin_response(const std::optional<std::string>& emotion) const;

    const std::vector<Turn>& turns() const { return turns_; }
    const std::string& active_speaker() const { return active_speaker_; }
    void set_active_speaker(std::string speaker);
    const VocabSpec& vocab() const { return *vocab_; }

private:
    void drop_old_rounds();

    const VocabSpec* vocab_;
    std::string active_speaker_;
    std::size_t max_rounds_;
    std::vector<Turn> turns_;
};

// JSON Lines round trip: one turn per line with role, modality, text,
// emotion, speaker (and audio_handle when present).
std::string turns_to_jsonl(const std::vector<Turn>& turns);
std::vector<Turn> turns_from_jsonl(const std::string& text);

} // namespace lucy
