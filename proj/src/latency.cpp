#include "lucy/latency.hpp"
#include "lucy/conversation.hpp"
#include "lucy/errors.hpp"

#include <chrono>
#include <random>

namespace lucy {

using nlohmann::json;

double SystemClock::now() {
    const auto t = std::chrono::steady_clock::now().time_since_epoch();
    return std::chrono::duration<double>(t).count();
}

bool RunStamps::valid() const {
    if (receipt_complete < send_complete) return false;
    if (first_audio_chunk < receipt_complete) return false;
    if (first_response_byte < send_complete) return false;
    // total must cover the server-side first-chunk cost
    if (first_response_byte - send_complete < first_audio_chunk - receipt_complete)
        return false;
    for (double s : step_seconds)
        if (s < 0.0) return false;
    return true;
}

LatencyReport measure_latency(std::span<const RunStamps> stamps) {
    LatencyReport report;
    double total_sum = 0.0, first_chunk_sum = 0.0, step_sum = 0.0;
    std::size_t step_count = 0;
    for (const RunStamps& run : stamps) {
        if (!run.valid()) {
            report.partial = true;
            continue;
        }
        total_sum += run.first_response_byte - run.send_complete;
        first_chunk_sum += run.first_audio_chunk - run.receipt_complete;
        for (double s : run.step_seconds) step_sum += s;
        step_count += run.step_seconds.size();
        report.runs += 1;
    }
    if (report.runs == 0) throw domain_error("latency report needs at least one valid run");
    report.total_s = total_sum / static_cast<double>(report.runs);
    report.first_chunk_s = first_chunk_sum / static_cast<double>(report.runs);
    report.per_step_s = step_count == 0 ? 0.0 : step_sum / static_cast<double>(step_count);
    report.derived_network_s = report.total_s - report.first_chunk_s;
    return report;
}

json latency_report_json(const LatencyReport& report, std::span<const RunStamps> stamps) {
    json raw = json::array();
    for (const RunStamps& run : stamps)
        raw.push_back(json{{"send_complete", run.send_complete},
                           {"receipt_complete", run.receipt_complete},
                           {"first_audio_chunk", run.first_audio_chunk},
                           {"first_response_byte", run.first_response_byte},
                           {"step_seconds", run.step_seconds}});
    return json{{"total_s", report.total_s},
                {"first_chunk_s", report.first_chunk_s},
                {"per_step_s", report.per_step_s},
                {"derived_network_s", report.derived_network_s},
                {"runs", report.runs},
                {"partial", report.partial},
                {"stamps", raw}};
}

TimedPredictor::TimedPredictor(std::unique_ptr<Predictor> inner, Clock& clock,
                               FakeClock* advance, double step_cost_s,
                               std::vector<double>* step_log)
    : inner_(std::move(inner)),
      clock_(&clock),
      advance_(advance),
      step_cost_s_(step_cost_s),
      step_log_(step_log) {
    if (!inner_) throw config_error("timed predictor has no inner predictor");
}

StepPrediction TimedPredictor::step(std::span<const ParallelFrame> context) {
    const double before = clock_->now();
    StepPrediction pred = inner_->step(context);
    if (advance_) advance_->advance(step_cost_s_);
    if (step_log_) step_log_->push_back(clock_->now() - before);
    return pred;
}

void TimedPredictor::reset() { inner_->reset(); }

std::unique_ptr<Predictor> TimedPredictor::clone() const {
    return std::make_unique<TimedPredictor>(inner_->clone(), *clock_, advance_, step_cost_s_,
                                            step_log_);
}

LatencyReport bench_latency(std::size_t runs, const BenchScenario& scenario,
                            std::vector<RunStamps>* out_stamps) {
    if (runs == 0) throw domain_error("bench needs at least one run");

    const VocabSpec vocab = make_harness_vocab();
    const DelayPattern pattern = DelayPattern::cumulative(vocab.num_layers());
    std::mt19937_64 rng(scenario.seed);

    std::vector<RunStamps> stamps;
    stamps.reserve(runs);
    for (std::size_t r = 0; r < runs; ++r) {
        // fresh scripted response per run
        ParallelSequence script;
        script.frames.resize(scenario.script_frames);
        for (auto& frame : script.frames) {
            frame.text = *vocab.byte_base + static_cast<token_id>(rng() % 256);
            frame.audio.resize(vocab.num_audio_layers);
            for (auto& a : frame.audio) {
                do {
                    a = static_cast<token_id>(rng() % vocab.audio_vocab_size);
                } while (a == vocab.reserved.pad_audio);
            }
        }
        const DelayedGrid target =
            apply_delay(script, pattern, vocab.reserved.pad_text, vocab.reserved.pad_audio);

        FakeClock clock;
        RunStamps run;
        run.send_complete = clock.now();
        clock.advance(scenario.uplink_s);
        run.receipt_complete = clock.now();

        DecodeConfig cfg;
        cfg.vocab = &vocab;
        cfg.pattern = pattern;
        cfg.chunk_frames = scenario.chunk_frames;
        auto timed = std::make_unique<TimedPredictor>(
            std::make_unique<ScriptedPredictor>(vocab, target), clock, &clock,
            scenario.step_cost_s, &run.step_seconds);
        DecodeSession session(cfg, std::move(timed));

        ConversationState state(vocab, "female");
        state.push_user_text(encode_text(vocab, "ping"));

        bool saw_chunk = false;
        session.decode_stream(state.serialize_prompt(), [&](const DecodeEvent& ev) {
            if (!saw_chunk && std::holds_alternative<AudioChunk>(ev)) {
                saw_chunk = true;
                run.first_audio_chunk = clock.now();
                run.first_response_byte = run.first_audio_chunk + scenario.downlink_s;
            }
        });
        if (!saw_chunk) {
            // no audio in the response: mark the run unusable
            run.first_audio_chunk = run.receipt_complete - 1.0;
        }
        stamps.push_back(std::move(run));
    }
    if (out_stamps) *out_stamps = stamps;
    return measure_latency(stamps);
}

} // namespace lucy
