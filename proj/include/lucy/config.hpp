// Runtime configuration: vocab, delay pattern, decode knobs, gate threshold,
// tool registry, and the predictor plugin — loadable from a JSON file named
// by the LUCY_CONFIG environment variable.
#pragma once

#include "lucy/decoder.hpp"
#include "lucy/framing.hpp"
#include "lucy/vocab.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace lucy {

struct PredictorConfig {
    std::string type = "uniform";             // "uniform" | "scripted"
    std::optional<std::string> frames_path;   // scripted: token grid file
    double epsilon = 0.0;                     // scripted: off-target mass
};

struct LucyConfig {
    VocabSpec vocab;
    DelayPattern pattern;
    std::uint32_t chunk_frames = 2;
    std::size_t max_steps = 4096;
    double gate_threshold = 0.5;
    std::string speaker = "female";
    int samples_per_frame = 1365;
    std::optional<std::string> tool_registry_path;
    PredictorConfig predictor;

    void validate() const;
};

// Harness vocab, cumulative delay, uniform predictor.
LucyConfig default_config();

// Keys: vocab (path or inline object), delay_pattern ("cumulative" |
// "uniform" | "none" | offset array), chunk_frames, max_steps,
// gate_threshold, speaker, samples_per_frame, tool_registry (path),
// predictor {type, frames, epsilon}. Relative paths resolve against base_dir.
LucyConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir);
LucyConfig load_config(const std::string& path);

// load_config(path) when set, else default_config().
LucyConfig config_from_env(const char* env_var = "LUCY_CONFIG");

// One fresh predictor per call, per the configured plugin. The factory owns
// the vocab its predictors reference: keep it alive while any predictor lives.
std::function<std::unique_ptr<Predictor>()> make_predictor_factory(const LucyConfig& cfg);

// Declared tools from tool_registry_path merged over the default stubs.
ToolRegistry load_tool_registry(const LucyConfig& cfg);

} // namespace lucy
