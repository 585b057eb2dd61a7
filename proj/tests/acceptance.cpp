// Acceptance gate: one [PASS]/[FAIL] line per criterion, nonzero exit when
// anything fails. Each check is self-contained and uses independent oracles
// (closed forms, brute-force references, committed golden bytes).
#include "lucy/conversation.hpp"
#include "lucy/decoder.hpp"
#include "lucy/eval.hpp"
#include "lucy/framing.hpp"
#include "lucy/frontend.hpp"
#include "lucy/latency.hpp"
#include "lucy/predictor.hpp"
#include "lucy/vocab.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "golden_session.hpp"
#include "helpers.hpp"

using namespace lucy;
using lucy::testing::byte_tokens;
using lucy::testing::random_sequence;
using nlohmann::json;

namespace {

// a criterion returns nullopt on success or a short failure description
using Criterion = std::optional<std::string> (*)();

std::optional<std::string> fail(std::string why) { return why; }
std::optional<std::string> pass() { return std::nullopt; }

#define EXPECT(cond)                                                  \
    do {                                                              \
        if (!(cond)) return fail("expectation failed: " #cond);      \
    } while (0)

#define EXPECT_NEAR(a, b, tol)                                        \
    do {                                                              \
        if (!(std::abs((a) - (b)) <= (tol)))                          \
            return fail("expectation failed: " #a " ~ " #b);         \
    } while (0)

// ---- 1. delay round trip ----

std::optional<std::string> check_delay_round_trip() {
    const auto started = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    for (const std::uint32_t layers : {2u, 8u}) {
        for (const bool cumulative : {true, false}) {
            const DelayPattern pat = cumulative ? DelayPattern::cumulative(layers)
                                                : DelayPattern::uniform(layers);
            for (int i = 0; i < 250; ++i) {
                const std::size_t len = rng() % 65;
                const ParallelSequence seq = random_sequence(rng, len, layers - 1);
                const DelayedGrid grid = apply_delay(seq, pat, 0, 1);
                if (grid.size() != len + pat.max_offset())
                    return fail("grid length is not len + max offset");
                if (remove_delay(grid, pat) != seq)
                    return fail("round trip mismatch at length " + std::to_string(len));
            }
        }
    }
    const auto elapsed = std::chrono::steady_clock::now() - started;
    EXPECT(elapsed < std::chrono::seconds(5));
    return pass();
}

// ---- 2. scripted decode reproduces its script ----

std::optional<std::string> check_streaming_decode() {
    const VocabSpec vocab = make_harness_vocab();
    const DelayPattern pattern = DelayPattern::cumulative(vocab.num_layers());
    const auto& labels = default_emotion_labels();
    std::mt19937_64 rng(202);

    ConversationState conv(vocab, "female");
    conv.push_user_text(byte_tokens(vocab, "q"));
    const SerializedPrompt prompt = conv.serialize_prompt();

    for (int i = 0; i < 100; ++i) {
        const std::size_t len = 1 + rng() % 32;
        ParallelSequence script = random_sequence(rng, len, vocab.num_audio_layers);
        for (auto& frame : script.frames)
            frame.text = *vocab.byte_base + static_cast<token_id>(rng() % 256);
        std::optional<std::string> emotion;
        if (i % 2 == 0) {
            emotion = labels[rng() % labels.size()];
            script.frames[0].text = vocab.reserved.emotion.at(*emotion);
        }
        std::vector<token_id> expected_text;
        for (std::size_t t = emotion ? 1 : 0; t < len; ++t)
            expected_text.push_back(script.frames[t].text);
        std::vector<std::vector<token_id>> expected_audio;
        for (const auto& frame : script.frames) expected_audio.push_back(frame.audio);

        const DelayedGrid grid = apply_delay(script, pattern, vocab.reserved.pad_text,
                                             vocab.reserved.pad_audio);
        for (const std::size_t chunk : {1u, 2u, 4u, 8u}) {
            DecodeConfig cfg;
            cfg.vocab = &vocab;
            cfg.pattern = pattern;
            cfg.chunk_frames = chunk;
            DecodeSession session(cfg, std::make_unique<ScriptedPredictor>(vocab, grid));
            const DecodeOutcome out = session.decode_collect(prompt);
            if (out.text != expected_text)
                return fail("text mismatch (script " + std::to_string(i) + ", chunk " +
                            std::to_string(chunk) + ")");
            if (out.audio != expected_audio)
                return fail("audio mismatch (script " + std::to_string(i) + ", chunk " +
                            std::to_string(chunk) + ")");
            if (out.emotion != emotion)
                return fail("emotion mismatch (script " + std::to_string(i) + ")");
            if (out.truncated) return fail("unexpected truncation");
        }
    }
    return pass();
}

// ---- 3. teacher-forced scorer ----

std::optional<std::string> check_scorer() {
    const VocabSpec vocab = make_harness_vocab();
    const DelayPattern pattern = DelayPattern::cumulative(vocab.num_layers());
    std::mt19937_64 rng(303);
    const ParallelSequence target = random_sequence(rng, 20, vocab.num_audio_layers);

    ScriptedPredictor self(vocab, apply_delay(target, pattern, vocab.reserved.pad_text,
                                              vocab.reserved.pad_audio));
    const NllScore own = nll_score(self, target, pattern, vocab.reserved.pad_text,
                                   vocab.reserved.pad_audio);
    EXPECT(own.nats == 0.0);
    EXPECT(!own.degenerate);

    // uniform predictor over V=4: every position and layer scores ln 4
    VocabSpec tiny;
    tiny.text_vocab_size = 4;
    tiny.audio_vocab_size = 4;
    tiny.num_audio_layers = 7;
    UniformPredictor uniform(tiny);
    ParallelSequence two;
    two.frames.resize(2);
    for (auto& frame : two.frames) {
        frame.text = 1;
        frame.audio.assign(tiny.num_audio_layers, 2);
    }
    const NllScore flat =
        nll_score(uniform, two, DelayPattern::none(tiny.num_layers()), 0, 0);
    EXPECT_NEAR(flat.nats, 16.0 * std::log(4.0), 1e-9);
    EXPECT(!flat.degenerate);
    return pass();
}

// ---- 4. two-lane function-call decoding ----

std::optional<std::string> check_function_call_lanes() {
    const VocabSpec vocab = make_harness_vocab();
    const DelayPattern pattern = DelayPattern::cumulative(vocab.num_layers());
    std::mt19937_64 rng(404);

    ConversationState conv(vocab, "female");
    conv.push_user_text(byte_tokens(vocab, "q"));
    const SerializedPrompt prompt = conv.serialize_prompt();

    for (int i = 0; i < 50; ++i) {
        const json arguments = {{"query", "q" + std::to_string(i)}, {"k", i}};
        const json payload = {{"name", "web_search"}, {"arguments", arguments}};

        ParallelSequence script = random_sequence(rng, 0, vocab.num_audio_layers);
        auto push_text = [&](token_id text) {
            ParallelFrame frame;
            frame.text = text;
            frame.audio.resize(vocab.num_audio_layers);
            for (auto& a : frame.audio) a = static_cast<token_id>(2 + rng() % 60);
            script.frames.push_back(std::move(frame));
        };
        for (const token_id t : byte_tokens(vocab, "calling ")) push_text(t);
        push_text(vocab.reserved.tool_call_open);
        for (const token_id t : byte_tokens(vocab, payload.dump())) push_text(t);
        push_text(vocab.reserved.tool_call_close);

        // lane B disagrees on every text token
        ParallelSequence off_script = script;
        for (auto& frame : off_script.frames) {
            token_id other = *vocab.byte_base + static_cast<token_id>(rng() % 256);
            if (other == frame.text) other = *vocab.byte_base + ((other + 1) % 256);
            frame.text = other;
        }

        DecodeConfig cfg;
        cfg.vocab = &vocab;
        cfg.pattern = pattern;
        ScriptedPredictor text_lane(vocab, apply_delay(script, pattern,
                                                       vocab.reserved.pad_text,
                                                       vocab.reserved.pad_audio));
        ScriptedPredictor speech_lane(vocab, apply_delay(off_script, pattern,
                                                         vocab.reserved.pad_text,
                                                         vocab.reserved.pad_audio));
        const FunctionCallResult result =
            decode_function_call_lanes(cfg, text_lane, speech_lane, prompt);

        // the text layer of the delayed grid: script text, then pads while the
        // staggered audio layers drain
        std::vector<token_id> expected_full;
        for (const auto& frame : script.frames) expected_full.push_back(frame.text);
        expected_full.resize(expected_full.size() + pattern.max_offset(),
                             vocab.reserved.pad_text);
        if (result.full_text != expected_full)
            return fail("lane-A text mismatch on script " + std::to_string(i));
        if (result.lane_b_text != result.full_text)
            return fail("lane-B text was not substituted on script " + std::to_string(i));
        if (!result.tool_call) return fail("tool call missing on script " + std::to_string(i));
        if (result.tool_call->name != "web_search" || result.tool_call->arguments != arguments)
            return fail("tool call did not round-trip on script " + std::to_string(i));
    }
    return pass();
}

// ---- 5. metric oracles ----

std::size_t lev_cost(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1), prev[j] + 1,
                               cur[j - 1] + 1});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::optional<std::string> check_metric_oracles() {
    // hand-computed function-call fixture covering every selection outcome
    std::vector<FcCase> cases(6);
    cases[0] = {"right", "weather", json::object(), "weather", json::object(), true, true};
    cases[1] = {"wrong-tool", "weather", json::object(), "search", json::object(), false, true};
    cases[2] = {"missed", "weather", json::object(), std::nullopt, json::object(),
                std::nullopt, std::nullopt};
    cases[3] = {"spurious", std::nullopt, json::object(), "weather", json::object(),
                false, false};
    cases[4] = {"abstained", std::nullopt, json::object(), std::nullopt, json::object(),
                std::nullopt, std::nullopt};
    cases[5] = {"bad-params", "search", json::object(), "search", json::object(), false, false};
    const FcMetrics m = fc_metrics(cases);
    EXPECT(m.selection_acc == 0.5);
    EXPECT(m.selection.precision == 0.5);
    EXPECT(m.selection.recall == 0.5);
    EXPECT(m.selection.f1 == 0.5);
    EXPECT(m.param_acc == 0.25);
    EXPECT(m.response_acc == 0.5);
    EXPECT(m.overall_acc == 2.0 / 6.0);

    // word and character error rates on hand-counted pairs
    const WerResult extra = wer("the cat sat", "the cat sat on");
    EXPECT(extra.counts == (EditCounts{0, 1, 0, 3}));
    EXPECT(extra.rate == 1.0 / 3.0);
    const WerResult accents = cer("caf\xc3\xa9", "cafe");
    EXPECT(accents.counts == (EditCounts{1, 0, 0, 4}));

    // brute force: every word-sequence pair of length <= 4 over {a, b, c}
    std::vector<std::vector<std::string>> seqs = {{}};
    std::size_t begin = 0;
    for (int len = 1; len <= 4; ++len) {
        const std::size_t end = seqs.size();
        for (std::size_t s = begin; s < end; ++s)
            for (const char* w : {"a", "b", "c"}) {
                auto grown = seqs[s];
                grown.push_back(w);
                seqs.push_back(std::move(grown));
            }
        begin = end;
    }
    auto join = [](const std::vector<std::string>& words) {
        std::string out;
        for (const auto& w : words) {
            if (!out.empty()) out += ' ';
            out += w;
        }
        return out;
    };
    for (const auto& ref : seqs)
        for (const auto& hyp : seqs) {
            const WerResult r = wer(join(ref), join(hyp));
            if (r.counts.edits() != lev_cost(ref, hyp))
                return fail("edit distance disagrees with the brute-force oracle");
            if (r.counts.ref_len != ref.size()) return fail("wrong reference length");
            if (r.counts.ref_len + r.counts.insertions - r.counts.deletions != hyp.size())
                return fail("edit counts do not reconcile with the hypothesis length");
        }

    // published rejection operating point: 94/100 answered, 65/100 leaked
    std::vector<RejectionCase> rejection;
    for (int i = 0; i < 94; ++i) rejection.push_back({"tp", true, true});
    for (int i = 0; i < 6; ++i) rejection.push_back({"fn", true, false});
    for (int i = 0; i < 65; ++i) rejection.push_back({"fp", false, true});
    for (int i = 0; i < 35; ++i) rejection.push_back({"tn", false, false});
    const PrecisionRecall pr = rejection_metrics(rejection);
    EXPECT_NEAR(pr.precision, 0.59, 0.005);
    EXPECT_NEAR(pr.recall, 0.94, 0.005);
    EXPECT_NEAR(pr.f1, 0.73, 0.005);
    return pass();
}

// ---- 6. history purity ----

std::optional<std::string> check_history_purity() {
    const VocabSpec vocab = make_harness_vocab();
    const std::vector<token_id> speaker_ids = {vocab.reserved.speaker.at("male"),
                                               vocab.reserved.speaker.at("female")};
    const auto& labels = default_emotion_labels();
    std::mt19937_64 rng(606);

    for (int trace = 0; trace < 200; ++trace) {
        ConversationState conv(vocab, rng() % 2 ? "male" : "female");
        std::vector<std::vector<token_id>> committed;

        const int rounds = 1 + static_cast<int>(rng() % 5);
        for (int round = 0; round < rounds; ++round) {
            if (rng() % 2) {
                conv.push_user_text(byte_tokens(vocab, "u" + std::to_string(round)));
            } else {
                std::optional<std::string> emotion;
                if (rng() % 2) emotion = labels[rng() % labels.size()];
                conv.push_user_speech("h" + std::to_string(round), emotion);
            }

            const int legs = rng() % 3 == 0 ? 2 : 1; // sometimes a tool round
            for (int leg = 0; leg < legs; ++leg) {
                const SerializedPrompt prompt = conv.serialize_prompt();
                std::size_t speakers = 0;
                for (const token_id t : prompt.tokens)
                    speakers += (t == speaker_ids[0]) + (t == speaker_ids[1]);
                if (speakers != 1)
                    return fail("prompt carried " + std::to_string(speakers) +
                                " speaker tokens");

                std::vector<token_id> text =
                    byte_tokens(vocab, "a" + std::to_string(round) + std::to_string(leg));
                std::vector<std::vector<token_id>> audio(
                    3 + rng() % 5, std::vector<token_id>(vocab.num_audio_layers));
                for (auto& frame : audio)
                    for (auto& a : frame) a = static_cast<token_id>(rng() % 64);
                committed.push_back(text);
                conv.commit_response(text, std::move(audio));
                if (leg + 1 < legs) conv.push_tool_text(byte_tokens(vocab, "payload"));
            }
        }

        std::size_t seen = 0;
        for (const Turn& turn : conv.turns()) {
            if (turn.role != Role::assistant) continue;
            if (turn.modality != Modality::text) return fail("assistant turn is not text-only");
            if (turn.audio_handle) return fail("assistant turn holds an audio handle");
            if (turn.text_tokens != committed[seen])
                return fail("assistant turn stored tokens beyond the committed text");
            ++seen;
        }
        if (seen != committed.size()) return fail("missing assistant turns");
    }
    return pass();
}

// ---- 7. frontend rate chain ----

std::optional<std::string> check_frontend_shapes() {
    const MelConfig mel;
    const FeatureChain chain;
    EXPECT(mel_frame_count(16000, mel) == 100);
    const ChainShapes shapes = chain_shapes(100, chain);
    EXPECT(shapes == (ChainShapes{25, 12}));
    EXPECT(adapter_rate_hz(mel, chain) == 12.5);

    const RateReport rates = rate_check(82.0 / 7.0);
    EXPECT_NEAR(rates.total_hz, 82.0, 1e-9);
    EXPECT_NEAR(rates.coarse_hz * 2, rates.mid_hz, 1e-12);
    EXPECT_NEAR(rates.coarse_hz * 4, rates.fine_hz, 1e-12);
    return pass();
}

// ---- 8. latency accounting ----

std::optional<std::string> check_latency_accounting() {
    RunStamps stamps;
    stamps.send_complete = 0.0;
    stamps.receipt_complete = 0.0;
    stamps.first_audio_chunk = 0.3590;
    stamps.first_response_byte = 0.4652;
    stamps.step_seconds = {0.0201, 0.0199, 0.0200};
    EXPECT(stamps.valid());

    const RunStamps runs[] = {stamps};
    const LatencyReport report = measure_latency(runs);
    EXPECT_NEAR(report.total_s, 0.4652, 1e-12);
    EXPECT_NEAR(report.first_chunk_s, 0.3590, 1e-12);
    EXPECT_NEAR(report.derived_network_s, 0.1062, 1e-12);
    EXPECT(report.derived_network_s == report.total_s - report.first_chunk_s);

    const double mean = (0.0201 + 0.0199 + 0.0200) / 3.0;
    EXPECT_NEAR(report.per_step_s, mean, 1e-12);
    return pass();
}

// ---- 9. golden wire transcript ----

std::optional<std::string> check_golden_transcript() {
    const std::string first = lucy::testing::run_golden_session();
    const std::string second = lucy::testing::run_golden_session();
    EXPECT(first == second);
    EXPECT(!first.empty());

    const std::string path = std::string(LUCY_TEST_DIR) + "/golden/serve_transcript.ndjson";
    std::ifstream in(path, std::ios::binary);
    if (!in) return fail("golden transcript file is missing: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (buf.str() != first) return fail("transcript differs from the committed golden bytes");
    return pass();
}

} // namespace

int main() {
    const std::pair<const char*, Criterion> criteria[] = {
        {"delay round trip over random sequences", &check_delay_round_trip},
        {"streaming decode reproduces scripted targets", &check_streaming_decode},
        {"teacher-forced scorer matches closed forms", &check_scorer},
        {"two-lane decode substitutes text and parses tool calls", &check_function_call_lanes},
        {"metric oracles reproduce hand-computed fixtures", &check_metric_oracles},
        {"history stays text-only with one speaker token per prompt", &check_history_purity},
        {"frontend rate chain shapes", &check_frontend_shapes},
        {"latency report derives the network share", &check_latency_accounting},
        {"golden wire transcript is byte-stable", &check_golden_transcript},
    };

    int failures = 0;
    int index = 0;
    for (const auto& [name, fn] : criteria) {
        ++index;
        std::optional<std::string> error;
        try {
            error = fn();
        } catch (const std::exception& e) {
            error = std::string("exception: ") + e.what();
        }
        if (error) {
            ++failures;
            std::printf("[FAIL] %d. %s — %s\n", index, name, error->c_str());
        } else {
            std::printf("[PASS] %d. %s\n", index, name);
        }
    }
    if (failures) std::printf("%d of 9 criteria failed\n", failures);
    else std::printf("all 9 criteria passed\n");
    return failures == 0 ? 0 : 1;
}
