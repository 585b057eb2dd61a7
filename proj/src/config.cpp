#include "lucy/config.hpp"
#include "lucy/errors.hpp"
#include "lucy/predictor.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lucy {

using nlohmann::json;

void LucyConfig::validate() const {
    vocab.validate();
    pattern.validate();
    if (pattern.arity() != vocab.num_layers())
        throw config_error("delay pattern arity does not match vocab layers");
    if (chunk_frames == 0) throw config_error("chunk_frames must be >= 1");
    if (max_steps == 0) throw config_error("max_steps must be >= 1");
    if (samples_per_frame <= 0) throw config_error("samples_per_frame must be positive");
    if (!vocab.reserved.speaker.count(speaker))
        throw config_error("unknown speaker: " + speaker);
    if (predictor.type != "uniform" && predictor.type != "scripted")
        throw config_error("unknown predictor type: " + predictor.type);
    if (predictor.type == "scripted" && !predictor.frames_path)
        throw config_error("scripted predictor needs a frames path");
}

LucyConfig default_config() {
    LucyConfig cfg;
    cfg.vocab = make_harness_vocab();
    cfg.pattern = DelayPattern::cumulative(cfg.vocab.num_layers());
    return cfg;
}

namespace {

std::string resolve_path(const std::string& path, const std::string& base_dir) {
    if (path.empty() || path.front() == '/' || base_dir.empty()) return path;
    return base_dir + "/" + path;
}

DelayPattern pattern_from_json(const json& value, std::uint32_t num_layers) {
    if (value.is_string()) {
        const std::string name = value.get<std::string>();
        if (name == "cumulative") return DelayPattern::cumulative(num_layers);
        if (name == "uniform") return DelayPattern::uniform(num_layers);
        if (name == "none") return DelayPattern::none(num_layers);
        throw config_error("unknown delay pattern: " + name);
    }
    if (value.is_array()) {
        DelayPattern pat;
        pat.offsets = value.get<std::vector<std::uint32_t>>();
        pat.validate();
        return pat;
    }
    throw config_error("delay_pattern must be a name or an offset array");
}

} // namespace

LucyConfig config_from_json(const json& doc, const std::string& base_dir) {
    if (!doc.is_object()) throw config_error("config root must be a json object");
    LucyConfig cfg = default_config();

    if (doc.contains("vocab")) {
        const json& v = doc["vocab"];
        if (v.is_string())
            cfg.vocab = load_vocab(resolve_path(v.get<std::string>(), base_dir));
        else if (v.is_object())
            cfg.vocab = vocab_from_json(v.dump());
        else
            throw config_error("vocab must be a path or an inline object");
        cfg.pattern = DelayPattern::cumulative(cfg.vocab.num_layers());
    }
    if (doc.contains("delay_pattern"))
        cfg.pattern = pattern_from_json(doc["delay_pattern"], cfg.vocab.num_layers());
    if (doc.contains("chunk_frames")) cfg.chunk_frames = doc["chunk_frames"].get<std::uint32_t>();
    if (doc.contains("max_steps")) cfg.max_steps = doc["max_steps"].get<std::size_t>();
    if (doc.contains("gate_threshold")) cfg.gate_threshold = doc["gate_threshold"].get<double>();
    if (doc.contains("speaker")) cfg.speaker = doc["speaker"].get<std::string>();
    if (doc.contains("samples_per_frame"))
        cfg.samples_per_frame = doc["samples_per_frame"].get<int>();
    if (doc.contains("tool_registry"))
        cfg.tool_registry_path = resolve_path(doc["tool_registry"].get<std::string>(), base_dir);
    if (doc.contains("predictor")) {
        const json& p = doc["predictor"];
        if (!p.is_object()) throw config_error("predictor must be an object");
        cfg.predictor.type = p.value("type", "uniform");
        if (p.contains("frames"))
            cfg.predictor.frames_path = resolve_path(p["frames"].get<std::string>(), base_dir);
        cfg.predictor.epsilon = p.value("epsilon", 0.0);
    }
    cfg.validate();
    return cfg;
}

LucyConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw config_error("config file " + path + " is not valid json: " + e.what());
    }
    const auto slash = path.rfind('/');
    const std::string base_dir = slash == std::string::npos ? "" : path.substr(0, slash);
    return config_from_json(doc, base_dir);
}

LucyConfig config_from_env(const char* env_var) {
    const char* path = std::getenv(env_var);
    if (!path || !*path) return default_config();
    return load_config(path);
}

std::function<std::unique_ptr<Predictor>()> make_predictor_factory(const LucyConfig& cfg) {
    cfg.validate();
    // predictors reference the vocab by pointer; the factory closure owns it
    auto vocab = std::make_shared<const VocabSpec>(cfg.vocab);
    if (cfg.predictor.type == "scripted") {
        // load once, clone per decode
        std::shared_ptr<ScriptedPredictor> prototype = ScriptedPredictor::from_file(
            *vocab, *cfg.predictor.frames_path, cfg.predictor.epsilon);
        return [vocab, prototype] {
            auto fresh = prototype->clone();
            fresh->reset();
            return fresh;
        };
    }
    return [vocab]() -> std::unique_ptr<Predictor> {
        return std::make_unique<UniformPredictor>(*vocab);
    };
}

ToolRegistry load_tool_registry(const LucyConfig& cfg) {
    ToolRegistry reg = ToolRegistry::with_default_stubs();
    if (!cfg.tool_registry_path) return reg;
    std::ifstream in(*cfg.tool_registry_path);
    if (!in) throw config_error("cannot open tool registry: " + *cfg.tool_registry_path);
    std::ostringstream text;
    text << in.rdbuf();
    ToolRegistry declared = ToolRegistry::from_json(text.str());
    for (const std::string& name : declared.names())
        if (!reg.has(name))
            reg.bind(name, [name](const json&) { return tool_fallback_text(name); });
    return reg;
}

} // namespace lucy
