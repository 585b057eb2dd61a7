#include "cli.hpp"

#include "lucy/config.hpp"
#include "lucy/conversation.hpp"
#include "lucy/decoder.hpp"
#include "lucy/errors.hpp"
#include "lucy/eval.hpp"
#include "lucy/framing.hpp"
#include "lucy/latency.hpp"
#include "lucy/server.hpp"
#include "lucy/vocab.hpp"
#include "lucy/wire.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace lucy {

namespace {

using nlohmann::json;

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path);
    out << content;
    if (!out) throw data_error("failed writing file: " + path);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open input file: " + path);
    return in;
}

// ---- eval ----

struct EvalArgs {
    std::string input;
    std::string report; // optional json output path
    std::string ties = "half";
};

int run_eval(const std::string& family, const EvalArgs& args, std::ostream& out) {
    auto in = open_input(args.input);
    json report;
    std::string table;
    if (family == "fc") {
        const auto cases = fc_cases_from_jsonl(in);
        const FcMetrics m = fc_metrics(cases);
        report = fc_report(m);
        table = fc_table(m);
    } else if (family == "rejection") {
        const auto cases = rejection_cases_from_jsonl(in);
        const BinaryCounts counts = rejection_counts(cases);
        const PrecisionRecall pr = rejection_metrics(cases);
        report = rejection_report(pr, counts);
        table = rejection_table(pr);
    } else if (family == "qa") {
        const auto items = qa_items_from_jsonl(in);
        if (items.empty()) throw domain_error("presence rate needs at least one item");
        const QaCounts counts = qa_counts(items);
        report = qa_report(counts);
        table = qa_table(counts);
    } else if (family == "wer") {
        const auto cases = wer_cases_from_jsonl(in);
        if (cases.empty()) throw domain_error("wer needs at least one case");
        EditCounts words, chars;
        for (const WerCase& c : cases) {
            words += wer(c.ref, c.hyp).counts;
            chars += cer(c.ref, c.hyp).counts;
        }
        report = wer_report(words, chars);
        table = wer_table(words, chars);
    } else if (family == "emotion") {
        const auto cases = emotion_cases_from_jsonl(in);
        if (cases.empty()) throw domain_error("emotion accuracy needs at least one case");
        const EmotionAccuracy acc = emotion_accuracy(cases, default_emotion_labels());
        report = emotion_report(acc);
        table = emotion_table(acc);
    } else if (family == "winrate") {
        const auto verdicts = verdicts_from_jsonl(in);
        if (verdicts.empty()) throw domain_error("win rate needs at least one verdict");
        const TiePolicy policy = args.ties == "exclude" ? TiePolicy::exclude : TiePolicy::half;
        const WinCounts counts = win_counts(verdicts);
        report = winrate_report(counts, policy);
        table = winrate_table(counts, policy);
    } else {
        throw config_error("unknown eval family: " + family);
    }
    out << table;
    if (!args.report.empty()) write_text_file(args.report, report.dump(2) + "\n");
    return 0;
}

// ---- chat ----

struct ChatArgs {
    std::string speaker = "female";
    std::string emotion = "auto";
    std::uint32_t chunk_frames = 0; // 0 = from config
};

int run_chat(const ChatArgs& args, std::istream& in, std::ostream& out) {
    LucyConfig config = config_from_env();
    config.speaker = args.speaker;
    if (args.chunk_frames > 0) config.chunk_frames = args.chunk_frames;
    config.validate();
    if (args.emotion != "auto") emotion_token(config.vocab, args.emotion); // validates label

    const auto factory = make_predictor_factory(config);
    const ToolRegistry tools = load_tool_registry(config);
    ConversationState state(config.vocab, config.speaker);

    DecodeConfig dcfg;
    dcfg.vocab = &config.vocab;
    dcfg.pattern = config.pattern;
    dcfg.chunk_frames = config.chunk_frames;
    dcfg.max_steps = config.max_steps;

    out << "speaker: " << args.speaker << "; emotion: " << args.emotion
        << "; /quit to exit\n";
    std::string line;
    while (true) {
        out << "user> " << std::flush;
        if (!std::getline(in, line)) break;
        if (line == "/quit") break;
        if (line.empty()) continue;

        state.push_user_text(encode_text(config.vocab, line));
        std::vector<token_id> prefix;
        if (args.emotion != "auto") prefix = {emotion_token(config.vocab, args.emotion)};

        // streams the text as it decodes; audio is summarized afterwards
        std::size_t audio_frames = 0;
        auto run_decode = [&](const SerializedPrompt& prompt,
                              const std::vector<token_id>& response_prefix) {
            DecodeSession session(dcfg, factory());
            DecodeOutcome outcome;
            bool text_started = false;
            session.decode_stream(
                prompt,
                [&](const DecodeEvent& ev) {
                    if (const auto* delta = std::get_if<TextDelta>(&ev)) {
                        if (!text_started) {
                            out << "assistant> ";
                            text_started = true;
                        }
                        const token_id one[1] = {delta->token};
                        out << render_text(config.vocab, one) << std::flush;
                        outcome.text.push_back(delta->token);
                    } else if (const auto* emo = std::get_if<EmotionDetected>(&ev)) {
                        out << "[emotion: " << emo->label << "]\n";
                        outcome.emotion = emo->label;
                    } else if (const auto* chunk = std::get_if<AudioChunk>(&ev)) {
                        audio_frames += chunk->frames.size();
                        outcome.audio.insert(outcome.audio.end(), chunk->frames.begin(),
                                             chunk->frames.end());
                    } else if (const auto* done = std::get_if<DoneEvent>(&ev)) {
                        outcome.truncated = done->truncated;
                        outcome.steps = done->steps;
                    }
                },
                response_prefix);
            if (text_started) out << "\n";
            return outcome;
        };

        DecodeOutcome outcome = run_decode(state.serialize_prompt(), prefix);
        const std::optional<ToolCall> call = extract_tool_call(config.vocab, outcome.text);
        state.commit_response(outcome.text, std::move(outcome.audio), outcome.emotion);
        if (call) {
            const std::string payload = tools.has(call->name)
                                            ? tools.call(call->name, call->arguments)
                                            : tool_fallback_text(call->name);
            out << "[tool " << call->name << " " << call->arguments.dump() << " -> " << payload
                << "]\n";
            state.push_tool_text(encode_text(config.vocab, payload));
            DecodeOutcome after = run_decode(state.serialize_prompt(), {});
            state.commit_response(after.text, std::move(after.audio), after.emotion);
        }
        out << "[audio frames: " << audio_frames << "]\n";
    }
    return 0;
}

// ---- bench ----

struct BenchArgs {
    std::size_t runs = 10;
    BenchScenario scenario;
    std::string report;
};

int run_bench(const BenchArgs& args, std::ostream& out) {
    std::vector<RunStamps> stamps;
    const LatencyReport report = bench_latency(args.runs, args.scenario, &stamps);
    out << std::fixed << std::setprecision(6);
    out << "total_s            " << report.total_s << "\n";
    out << "first_chunk_s      " << report.first_chunk_s << "\n";
    out << "per_step_s         " << report.per_step_s << "\n";
    out << "derived_network_s  " << report.derived_network_s << "\n";
    out << "runs               " << report.runs << "\n";
    if (!args.report.empty())
        write_text_file(args.report, latency_report_json(report, stamps).dump(2) + "\n");
    return 0;
}

// ---- frames pack / unpack ----

json frames_to_json(const std::vector<ParallelFrame>& frames, std::uint32_t layers) {
    json arr = json::array();
    for (const ParallelFrame& f : frames)
        arr.push_back(json{{"text", f.text}, {"audio", f.audio}});
    return json{{"layers", layers}, {"frames", arr}};
}

std::pair<std::vector<ParallelFrame>, std::uint32_t> frames_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("frames") || !doc["frames"].is_array())
        throw parse_error("frames json must be {\"layers\":L, \"frames\":[...]}");
    std::vector<ParallelFrame> frames;
    for (const json& f : doc["frames"]) {
        ParallelFrame frame;
        frame.text = f.at("text").get<token_id>();
        frame.audio = f.at("audio").get<std::vector<token_id>>();
        frames.push_back(std::move(frame));
    }
    std::uint32_t layers;
    if (doc.contains("layers")) layers = doc["layers"].get<std::uint32_t>();
    else if (!frames.empty()) layers = frames[0].arity();
    else throw parse_error("frames json needs a layers field when frames are empty");
    return {std::move(frames), layers};
}

int run_frames_pack(const std::string& input, const std::string& output) {
    auto in = open_input(input);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw parse_error(std::string("frames input is not valid json: ") + e.what());
    }
    const auto [frames, layers] = frames_from_json(doc);
    save_frames(output, frames, layers);
    return 0;
}

int run_frames_unpack(const std::string& input, const std::string& output, std::ostream& out) {
    const std::vector<ParallelFrame> frames = load_frames(input);
    const std::uint32_t layers = frames.empty() ? 1 : frames[0].arity();
    const std::string text = frames_to_json(frames, layers).dump(2) + "\n";
    if (output.empty()) out << text;
    else write_text_file(output, text);
    return 0;
}

// ---- serve ----

int run_serve(const std::string& listen, std::ostream& out) {
    LucyConfig config = config_from_env();
    const auto factory = make_predictor_factory(config);
    const ToolRegistry tools = load_tool_registry(config);

    ServeConfig scfg;
    scfg.vocab = &config.vocab;
    scfg.pattern = config.pattern;
    scfg.chunk_frames = config.chunk_frames;
    scfg.max_steps = config.max_steps;
    scfg.gate_threshold = config.gate_threshold;
    scfg.speaker = config.speaker;
    scfg.samples_per_frame = config.samples_per_frame;
    scfg.make_predictor = factory;
    scfg.tools = &tools;

    NdjsonServer server(std::move(scfg));
    server.bind_listen(listen);
    out << "listening on port " << server.port() << "\n" << std::flush;
    server.run();
    return 0;
}

} // namespace

int cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
    CLI::App app{"parallel text+audio decoding toolkit"};
    app.require_subcommand(1);

    ChatArgs chat_args;
    auto* chat = app.add_subcommand("chat", "interactive half-duplex REPL");
    chat->add_option("--speaker", chat_args.speaker, "voice identity")
        ->check(CLI::IsMember({"male", "female"}));
    chat->add_option("--emotion", chat_args.emotion, "forced emotion label, or auto");
    chat->add_option("--chunk-frames", chat_args.chunk_frames, "audio frames per chunk");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "compute metrics over a jsonl file");
    eval->require_subcommand(1);
    std::vector<CLI::App*> families;
    for (const char* name : {"fc", "rejection", "qa", "wer", "emotion", "winrate"}) {
        auto* fam = eval->add_subcommand(name);
        fam->add_option("--input", eval_args.input, "jsonl input path")->required();
        fam->add_option("--report", eval_args.report, "json report output path");
        if (std::string(name) == "winrate")
            fam->add_option("--ties", eval_args.ties, "tie policy")
                ->check(CLI::IsMember({"half", "exclude"}));
        families.push_back(fam);
    }

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "latency accounting harness");
    auto* bench_latency_cmd = bench->add_subcommand("latency");
    bench->require_subcommand(1);
    bench_latency_cmd->add_option("--runs", bench_args.runs, "exchanges to average");
    bench_latency_cmd->add_option("--step-cost", bench_args.scenario.step_cost_s,
                                  "simulated seconds per decode step");
    bench_latency_cmd->add_option("--uplink", bench_args.scenario.uplink_s,
                                  "simulated client->server transit seconds");
    bench_latency_cmd->add_option("--downlink", bench_args.scenario.downlink_s,
                                  "simulated server->client transit seconds");
    bench_latency_cmd->add_option("--frames", bench_args.scenario.script_frames,
                                  "scripted response length");
    bench_latency_cmd->add_option("--chunk-frames", bench_args.scenario.chunk_frames,
                                  "audio frames per chunk");
    bench_latency_cmd->add_option("--seed", bench_args.scenario.seed, "script seed");
    bench_latency_cmd->add_option("--report", bench_args.report, "json report output path");

    std::string frames_input, frames_output;
    auto* frames = app.add_subcommand("frames", "token grid binary format tools");
    frames->require_subcommand(1);
    auto* pack = frames->add_subcommand("pack", "json -> binary");
    pack->add_option("--input", frames_input, "json input path")->required();
    pack->add_option("--output", frames_output, "binary output path")->required();
    auto* unpack = frames->add_subcommand("unpack", "binary -> json");
    unpack->add_option("--input", frames_input, "binary input path")->required();
    unpack->add_option("--output", frames_output, "json output path (default stdout)");

    std::string listen = "127.0.0.1:7707";
    auto* serve = app.add_subcommand("serve", "streaming ndjson service");
    serve->add_option("--listen", listen, "host:port (port 0 = ephemeral)");

    std::vector<const char*> argv;
    argv.push_back("lucy");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (app.got_subcommand(chat)) return run_chat(chat_args, in, out);
        if (app.got_subcommand(eval)) {
            for (CLI::App* fam : families)
                if (eval->got_subcommand(fam)) return run_eval(fam->get_name(), eval_args, out);
        }
        if (app.got_subcommand(bench)) return run_bench(bench_args, out);
        if (app.got_subcommand(frames)) {
            if (frames->got_subcommand(pack)) return run_frames_pack(frames_input, frames_output);
            return run_frames_unpack(frames_input, frames_output, out);
        }
        if (app.got_subcommand(serve)) return run_serve(listen, out);
    } catch (const parse_error& e) {
        err << "input error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        err << "input error: " << e.what() << "\n";
        return 2;
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const domain_error& e) {
        err << "input error: " << e.what() << "\n";
        return 2;
    } catch (const lookup_error& e) {
        err << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "no subcommand handled\n";
    return 2;
}

} // namespace lucy
