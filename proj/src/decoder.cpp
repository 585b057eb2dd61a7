#include "lucy/decoder.hpp"
#include "lucy/errors.hpp"

#include <algorithm>

namespace lucy {

using nlohmann::json;

void DecodeConfig::validate() const {
    if (!vocab) throw config_error("decode config has no vocab");
    pattern.validate();
    if (pattern.arity() != vocab->num_layers())
        throw shape_error("delay pattern arity does not match vocab layers");
    if (chunk_frames == 0) throw config_error("chunk_frames must be >= 1");
    if (max_steps == 0) throw config_error("max_steps must be >= 1");
}

DecodeSession::DecodeSession(DecodeConfig cfg, std::unique_ptr<Predictor> predictor)
    : cfg_(cfg), predictor_(std::move(predictor)) {
    cfg_.validate();
    if (!predictor_) throw config_error("decode session has no predictor");
}

void DecodeSession::mark_gated_out() {
    if (state_ != SessionState::idle && state_ != SessionState::gated_out)
        throw state_error("cannot gate a session that already started decoding");
    state_ = SessionState::gated_out;
}

namespace {

// Prompt tokens ride the text layer; audio layers hold pads.
std::vector<ParallelFrame> prompt_to_frames(const VocabSpec& spec,
                                            const std::vector<token_id>& tokens) {
    std::vector<ParallelFrame> frames(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        frames[i].text = tokens[i];
        frames[i].audio.assign(spec.num_audio_layers, spec.reserved.pad_audio);
    }
    return frames;
}

bool is_emotion_id(const VocabSpec& spec, token_id id) {
    for (const auto& [label, tid] : spec.reserved.emotion)
        if (tid == id) return true;
    return false;
}

} // namespace

void DecodeSession::decode_stream(const SerializedPrompt& prompt, const EventSink& sink,
                                  const std::vector<token_id>& response_prefix) {
    if (state_ != SessionState::idle)
        throw state_error("decode_stream requires an idle session");
    state_ = SessionState::decoding;

    const VocabSpec& spec = *cfg_.vocab;
    const std::uint32_t max_off = cfg_.pattern.max_offset();

    std::vector<ParallelFrame> context = prompt_to_frames(spec, prompt.tokens);
    const std::size_t prompt_len = context.size();

    std::mt19937_64 rng(cfg_.seed);
    bool truncated = false;
    bool text_seen = false;
    std::size_t generated = 0;
    std::size_t frames_ready = 0;   // de-delayed frames fully determined
    std::size_t frames_emitted = 0; // already sent in chunks

    auto dedelayed_frame = [&](std::size_t t) {
        std::vector<token_id> audio(spec.num_audio_layers);
        for (std::uint32_t k = 1; k < cfg_.pattern.arity(); ++k)
            audio[k - 1] = context[prompt_len + t + cfg_.pattern.offsets[k]].audio[k - 1];
        return audio;
    };
    auto emit_chunk = [&](std::size_t count) {
        AudioChunk chunk;
        chunk.frames.reserve(count);
        for (std::size_t i = 0; i < count; ++i)
            chunk.frames.push_back(dedelayed_frame(frames_emitted + i));
        frames_emitted += count;
        sink(DecodeEvent{std::move(chunk)});
    };

    while (true) {
        if (generated >= cfg_.max_steps) {
            truncated = true;
            break;
        }
        StepPrediction pred = predictor_->step(context);
        ParallelFrame frame = cfg_.sample ? sample_step(pred, rng) : greedy_step(pred);
        if (generated < response_prefix.size()) frame.text = response_prefix[generated];
        ++steps_consumed_;

        if (frame.text == spec.reserved.eos) break;

        context.push_back(std::move(frame));
        ++generated;

        const token_id text = context.back().text;
        if (text != spec.reserved.pad_text) {
            if (!text_seen && is_emotion_id(spec, text)) {
                sink(DecodeEvent{EmotionDetected{parse_emotion_token(spec, text), text}});
            } else {
                sink(DecodeEvent{TextDelta{text}});
            }
            text_seen = true;
        }

        if (generated > max_off) {
            frames_ready = generated - max_off;
            if (frames_ready - frames_emitted >= cfg_.chunk_frames)
                emit_chunk(cfg_.chunk_frames);
        }
    }

    frames_ready = generated > max_off ? generated - max_off : 0;
    if (frames_ready > frames_emitted) emit_chunk(frames_ready - frames_emitted);

    state_ = SessionState::done;
    sink(DecodeEvent{DoneEvent{truncated, generated}});
}

DecodeOutcome DecodeSession::decode_collect(const SerializedPrompt& prompt,
                                            const std::vector<token_id>& response_prefix) {
    DecodeOutcome out;
    decode_stream(
        prompt,
        [&out](const DecodeEvent& ev) {
            if (const auto* delta = std::get_if<TextDelta>(&ev)) {
                out.text.push_back(delta->token);
            } else if (const auto* emo = std::get_if<EmotionDetected>(&ev)) {
                out.emotion = emo->label;
            } else if (const auto* chunk = std::get_if<AudioChunk>(&ev)) {
                out.audio.insert(out.audio.end(), chunk->frames.begin(), chunk->frames.end());
            } else if (const auto* done = std::get_if<DoneEvent>(&ev)) {
                out.truncated = done->truncated;
                out.steps = done->steps;
            }
        },
        response_prefix);
    return out;
}

// ---- gate ----

const char* gate_reason_name(GateReason r) {
    switch (r) {
        case GateReason::query: return "query";
        case GateReason::declarative: return "declarative";
        case GateReason::environmental_sound: return "environmental_sound";
    }
    return "query";
}

std::pair<double, GateReason> LabeledPassthroughClassifier::classify(
        const GateInput& input) const {
    if (!input.label) return {1.0, GateReason::query}; // unlabeled input is a query
    const std::string& label = *input.label;
    if (label == "question" || label == "query") return {1.0, GateReason::query};
    if (label == "declarative" || label == "statement") return {0.0, GateReason::declarative};
    if (label == "environmental_sound" || label == "noise")
        return {0.0, GateReason::environmental_sound};
    throw data_error("unknown gate label: " + label);
}

GateDecision gate(const GateClassifier* classifier, const GateInput& input,
                  DecodeSession& session, double threshold) {
    if (!classifier) throw config_error("no gate classifier registered");
    const auto [score, reason] = classifier->classify(input);
    GateDecision decision;
    decision.score = score;
    decision.reason = reason;
    decision.respond = score >= threshold;
    if (!decision.respond) session.mark_gated_out();
    return decision;
}

// ---- function calls ----

namespace {

struct MarkerSpan {
    std::size_t open = 0;
    std::size_t close = 0;
};

std::optional<MarkerSpan> find_marker_span(const VocabSpec& spec,
                                           const std::vector<token_id>& text) {
    const token_id open_id = spec.reserved.tool_call_open;
    const token_id close_id = spec.reserved.tool_call_close;
    std::optional<std::size_t> open;
    std::optional<MarkerSpan> span;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == open_id) {
            if (span) throw parse_error("second tool_call_open after a closed span");
            if (open) throw parse_error("nested tool_call_open marker");
            open = i;
        } else if (text[i] == close_id) {
            if (!open) throw parse_error("tool_call_close without matching open");
            span = MarkerSpan{*open, i};
            open.reset();
        }
    }
    if (open) throw parse_error("tool_call_open without matching close");
    return span;
}

ToolCall parse_tool_call(const VocabSpec& spec, std::span<const token_id> payload_ids) {
    std::string raw;
    try {
        raw = decode_bytes(spec, payload_ids);
    } catch (const parse_error& e) {
        throw parse_error(std::string("tool call span is not byte text: ") + e.what());
    }
    json doc;
    try {
        doc = json::parse(raw);
    } catch (const json::exception& e) {
        throw parse_error(std::string("tool call payload is not valid json: ") + e.what(), raw);
    }
    if (!doc.is_object() || !doc.contains("name") || !doc["name"].is_string() ||
        !doc.contains("arguments") || !doc["arguments"].is_object())
        throw parse_error("tool call payload must be {\"name\":..., \"arguments\":{...}}", raw);
    ToolCall call;
    call.name = doc["name"].get<std::string>();
    call.arguments = doc["arguments"];
    return call;
}

} // namespace

FunctionCallResult decode_function_call_lanes(const DecodeConfig& cfg, Predictor& text_lane,
                                              Predictor& speech_lane,
                                              const SerializedPrompt& prompt) {
    cfg.validate();
    const VocabSpec& spec = *cfg.vocab;
    const std::uint32_t max_off = cfg.pattern.max_offset();

    std::vector<ParallelFrame> ctx_a = prompt_to_frames(spec, prompt.tokens);
    std::vector<ParallelFrame> ctx_b = ctx_a;
    const std::size_t prompt_len = ctx_a.size();

    std::mt19937_64 rng_a(cfg.seed);
    std::mt19937_64 rng_b(cfg.seed + 1);

    std::size_t generated = 0;
    while (generated < cfg.max_steps) {
        StepPrediction pred_a = text_lane.step(ctx_a);
        ParallelFrame frame_a = cfg.sample ? sample_step(pred_a, rng_a) : greedy_step(pred_a);
        frame_a.audio.assign(spec.num_audio_layers, spec.reserved.pad_audio); // text-only lane

        StepPrediction pred_b = speech_lane.step(ctx_b);
        ParallelFrame frame_b = cfg.sample ? sample_step(pred_b, rng_b) : greedy_step(pred_b);
        frame_b.text = frame_a.text; // substitution: lane A owns the text channel

        if (frame_a.text == spec.reserved.eos) break;
        ctx_a.push_back(std::move(frame_a));
        ctx_b.push_back(std::move(frame_b));
        ++generated;
    }

    std::vector<token_id> text_a(generated);
    std::vector<token_id> text_b(generated);
    for (std::size_t t = 0; t < generated; ++t) {
        text_a[t] = ctx_a[prompt_len + t].text;
        text_b[t] = ctx_b[prompt_len + t].text;
    }

    const std::size_t voiced_len = generated > max_off ? generated - max_off : 0;
    auto dedelayed_frame = [&](std::size_t t) {
        std::vector<token_id> audio(spec.num_audio_layers);
        for (std::uint32_t k = 1; k < cfg.pattern.arity(); ++k)
            audio[k - 1] = ctx_b[prompt_len + t + cfg.pattern.offsets[k]].audio[k - 1];
        return audio;
    };

    FunctionCallResult result;
    result.full_text = text_a;
    result.lane_b_text = text_b;

    const auto span = find_marker_span(spec, text_a);
    if (span) {
        result.tool_call = parse_tool_call(
            spec, {text_a.data() + span->open + 1, span->close - span->open - 1});
    }
    auto in_span = [&](std::size_t t) { return span && t >= span->open && t <= span->close; };

    for (std::size_t t = 0; t < generated; ++t)
        if (!in_span(t) && text_a[t] != spec.reserved.pad_text)
            result.spoken_text.push_back(text_a[t]);
    for (std::size_t t = 0; t < voiced_len; ++t)
        if (!in_span(t)) result.speech_frames.push_back(dedelayed_frame(t));
    return result;
}

std::optional<ToolCall> extract_tool_call(const VocabSpec& spec,
                                          const std::vector<token_id>& text) {
    const auto span = find_marker_span(spec, text);
    if (!span) return std::nullopt;
    return parse_tool_call(spec,
                           {text.data() + span->open + 1, span->close - span->open - 1});
}

FunctionCallResult decode_function_call(DecodeSession& session, const SerializedPrompt& prompt) {
    if (session.state() != SessionState::idle)
        throw state_error("decode_function_call requires an idle session");
    auto lane_a = session.predictor().clone();
    auto lane_b = session.predictor().clone();
    lane_a->reset();
    lane_b->reset();
    return decode_function_call_lanes(session.config(), *lane_a, *lane_b, prompt);
}

// ---- tool registry ----

void ToolRegistry::declare(ToolSpec spec) {
    specs_[spec.name] = std::move(spec);
}

void ToolRegistry::bind(const std::string& name, ToolFn fn) {
    if (!specs_.count(name)) specs_[name] = ToolSpec{name, "", json::object()};
    fns_[name] = std::move(fn);
}

bool ToolRegistry::has(const std::string& name) const {
    return fns_.count(name) > 0;
}

std::string ToolRegistry::call(const std::string& name, const json& arguments) const {
    auto it = fns_.find(name);
    if (it == fns_.end()) throw tool_not_found_error(name);
    return it->second(arguments);
}

std::vector<std::string> ToolRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, spec] : specs_) out.push_back(name);
    return out;
}

ToolRegistry ToolRegistry::from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw parse_error(std::string("invalid tool registry json: ") + e.what());
    }
    if (!doc.is_array()) throw parse_error("tool registry must be a json array");
    ToolRegistry reg;
    for (const json& entry : doc) {
        ToolSpec spec;
        spec.name = entry.at("name").get<std::string>();
        spec.description = entry.value("description", "");
        spec.parameters_schema = entry.value("parameters_schema", json::object());
        reg.declare(std::move(spec));
    }
    return reg;
}

ToolRegistry ToolRegistry::with_default_stubs() {
    ToolRegistry reg;
    reg.declare({"web_search", "keyword search over a canned offline index",
                 json{{"type", "object"},
                      {"properties", json{{"query", json{{"type", "string"}}}}}}});
    reg.bind("web_search", [](const json& args) {
        const std::string query = args.value("query", "");
        return "web_search results for \"" + query + "\": offline stub entry";
    });
    return reg;
}

std::string resolve_tool(const FunctionCallResult& result, const ToolRegistry& registry) {
    if (!result.tool_call) throw state_error("function call result carries no tool call");
    return registry.call(result.tool_call->name, result.tool_call->arguments);
}

std::string tool_fallback_text(const std::string& tool_name) {
    return "I could not reach the tool \"" + tool_name + "\" right now, sorry about that.";
}

DecodeOutcome continue_after_tool(DecodeSession& session, ConversationState& state,
                                  const std::string& payload) {
    state.push_tool_text(encode_text(state.vocab(), payload));
    return session.decode_collect(state.serialize_prompt());
}

} // namespace lucy
