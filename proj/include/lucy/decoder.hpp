// Streaming decode sessions over a predictor: chunked audio emission,
// full-duplex rejection gating, and two-lane function-call decoding with
// text-channel substitution.
#pragma once

#include "lucy/conversation.hpp"
#include "lucy/framing.hpp"
#include "lucy/predictor.hpp"
#include "lucy/vocab.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lucy {

enum class SessionState { idle, gated_out, decoding, done };

struct DecodeConfig {
    const VocabSpec* vocab = nullptr;
    DelayPattern pattern;
    std::size_t chunk_frames = 2;
    std::size_t max_steps = 4096;
    bool sample = false; // greedy by default
    std::uint64_t seed = 0;

    void validate() const;
};

// Decode events, in emission order.
struct TextDelta {
    token_id token = 0;
};
struct EmotionDetected {
    std::string label;
    token_id token = 0;
};
struct AudioChunk {
    // De-delayed frames; each inner vector holds num_audio_layers ids.
    std::vector<std::vector<token_id>> frames;
};
struct DoneEvent {
    bool truncated = false;
    std::size_t steps = 0;
};
using DecodeEvent = std::variant<TextDelta, EmotionDetected, AudioChunk, DoneEvent>;
using EventSink = std::function<void(const DecodeEvent&)>;

// Everything a finished decode produced, for callers that do not stream.
struct DecodeOutcome {
    std::vector<token_id> text;
    std::vector<std::vector<token_id>> audio;
    std::optional<std::string> emotion;
    bool truncated = false;
    std::size_t steps = 0;
};

class DecodeSession {
public:
    DecodeSession(DecodeConfig cfg, std::unique_ptr<Predictor> predictor);

    // Steps the predictor until eos on the text layer or max_steps, emitting
    // TextDelta / EmotionDetected / AudioChunk / Done events in order. The
    // response_prefix forces the leading text tokens (a forced emotion token
    // surfaces as EmotionDetected).
    void decode_stream(const SerializedPrompt& prompt, const EventSink& sink,
                       const std::vector<token_id>& response_prefix = {});
    DecodeOutcome decode_collect(const SerializedPrompt& prompt,
                                 const std::vector<token_id>& response_prefix = {});

    SessionState state() const { return state_; }
    void mark_gated_out();
    std::size_t steps_consumed() const { return steps_consumed_; }
    const DecodeConfig& config() const { return cfg_; }
    Predictor& predictor() { return *predictor_; }

private:
    DecodeConfig cfg_;
    std::unique_ptr<Predictor> predictor_;
    SessionState state_ = SessionState::idle;
    std::size_t steps_consumed_ = 0;
};

// ---- full-duplex gate ----

enum class GateReason { query, declarative, environmental_sound };
const char* gate_reason_name(GateReason r);

struct GateDecision {
    bool respond = false;
    double score = 0.0; // respond == (score >= threshold)
    GateReason reason = GateReason::query;
};

struct GateInput {
    std::optional<std::string> label; // harness annotation, when available
    std::size_t num_samples = 0;
};

class GateClassifier {
public:
    virtual ~GateClassifier() = default;
    virtual std::pair<double, GateReason> classify(const GateInput& input) const = 0;
};

// Harness classifier: trusts the input's label field. Unlabeled input is
// treated as a query.
class LabeledPassthroughClassifier : public GateClassifier {
public:
    std::pair<double, GateReason> classify(const GateInput& input) const override;
};

// Applies the threshold (respond iff score >= threshold). A rejected input
// moves the session to gated_out so it consumes zero predictor steps.
GateDecision gate(const GateClassifier* classifier, const GateInput& input,
                  DecodeSession& session, double threshold = 0.5);

// ---- function calls ----

struct ToolCall {
    std::string name;
    nlohmann::json arguments; // JSON object

    bool operator==(const ToolCall& other) const {
        return name == other.name && arguments == other.arguments;
    }
};

struct FunctionCallResult {
    std::vector<token_id> spoken_text; // voiced span, marker span excluded
    std::optional<ToolCall> tool_call;
    std::vector<std::vector<token_id>> speech_frames; // voiced span only
    std::vector<token_id> full_text;                  // lane-A text incl. marker span
    std::vector<token_id> lane_b_text;                // equals lane-A text by construction
};

// Two-lane batch-parallel decode: the text lane's audio heads are forced to
// pad; at every step the speech lane's text token is overwritten by the text
// lane's token before being fed back. The marker span is parsed into the
// tool call and its audio is dropped as unvoiced.
FunctionCallResult decode_function_call(DecodeSession& session, const SerializedPrompt& prompt);
FunctionCallResult decode_function_call_lanes(const DecodeConfig& cfg, Predictor& text_lane,
                                              Predictor& speech_lane,
                                              const SerializedPrompt& prompt);

// Parses the tool-call marker span out of a decoded text sequence, if any.
// Throws parse_error on unbalanced markers or a malformed payload.
std::optional<ToolCall> extract_tool_call(const VocabSpec& spec,
                                          const std::vector<token_id>& text);

// ---- tool registry ----

struct ToolSpec {
    std::string name;
    std::string description;
    nlohmann::json parameters_schema;
};

using ToolFn = std::function<std::string(const nlohmann::json& arguments)>;

class ToolRegistry {
public:
    void declare(ToolSpec spec);
    void bind(const std::string& name, ToolFn fn);
    bool has(const std::string& name) const;
    std::string call(const std::string& name, const nlohmann::json& arguments) const;
    std::vector<std::string> names() const;

    // Declarations only: [{"name","description","parameters_schema"}]
    static ToolRegistry from_json(const std::string& json_text);
    // web_search stub with a canned payload.
    static ToolRegistry with_default_stubs();

private:
    std::map<std::string, ToolSpec> specs_;
    std::map<std::string, ToolFn> fns_;
};

// Invokes the named tool; throws tool_not_found_error when the result names
// no tool or the registry cannot serve it.
std::string resolve_tool(const FunctionCallResult& result, const ToolRegistry& registry);

// Spoken fallback for a failed tool resolution.
std::string tool_fallback_text(const std::string& tool_name);

// Appends the tool payload to the conversation (role=tool, text form) and
// runs a fresh decode over the re-serialized context for the voiced answer.
DecodeOutcome continue_after_tool(DecodeSession& session, ConversationState& state,
                                  const std::string& payload);

} // namespace lucy
