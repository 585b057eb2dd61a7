#include "lucy/errors.hpp"
#include "lucy/server.hpp"

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <regex>
#include <sstream>
#include <thread>

#include "golden_session.hpp"

using namespace lucy;
using lucy::testing::byte_tokens;
using lucy::testing::scripted_reply;

namespace {

struct SessionResult {
    std::vector<WireMessage> messages;
    std::string transcript;
};

SessionResult run_session(const ServeConfig& cfg, const std::vector<std::string>& input) {
    SessionResult r;
    std::size_t next = 0;
    WireChannel channel;
    channel.read_line = [&](std::string& line) {
        if (next >= input.size()) return false;
        line = input[next++];
        return true;
    };
    channel.write_line = [&](std::string_view bytes) {
        r.transcript.append(bytes);
        r.messages.push_back(decode_wire(bytes));
    };
    handle_session(cfg, channel);
    return r;
}

// scripted predictor factory over a fixed list of replies, one per decode
struct ScriptedServe {
    VocabSpec vocab = make_harness_vocab();
    DelayPattern pattern = DelayPattern::cumulative(8);
    std::shared_ptr<std::vector<DelayedGrid>> grids =
        std::make_shared<std::vector<DelayedGrid>>();
    std::shared_ptr<std::size_t> cursor = std::make_shared<std::size_t>(0);

    void add_reply(const std::vector<token_id>& text, std::uint64_t salt = 0) {
        grids->push_back(apply_delay(scripted_reply(vocab, text, salt), pattern,
                                     vocab.reserved.pad_text, vocab.reserved.pad_audio));
    }

    ServeConfig config() {
        ServeConfig cfg;
        cfg.vocab = &vocab;
        cfg.pattern = pattern;
        cfg.chunk_frames = 2;
        cfg.samples_per_frame = 16;
        auto g = grids;
        auto c = cursor;
        const VocabSpec* v = &vocab;
        cfg.make_predictor = [g, c, v]() -> std::unique_ptr<Predictor> {
            if (*c >= g->size()) throw state_error("script list exhausted");
            return std::make_unique<ScriptedPredictor>(*v, (*g)[(*c)++]);
        };
        return cfg;
    }

    std::vector<token_id> emotion_reply(const std::string& label, std::string_view text) {
        std::vector<token_id> out = {vocab.reserved.emotion.at(label)};
        const auto rest = byte_tokens(vocab, text);
        out.insert(out.end(), rest.begin(), rest.end());
        return out;
    }
};

std::string chunk_line() {
    return encode_wire(make_audio_chunk(std::vector<std::int16_t>{100, -100, 200, -200}, 1));
}

std::string end_line(const char* label) {
    WireMessage msg;
    msg.type = WireType::end;
    msg.label = label;
    return encode_wire(msg);
}

std::string joined_text(const std::vector<WireMessage>& msgs, std::size_t from = 0) {
    std::string out;
    for (std::size_t i = from; i < msgs.size(); ++i)
        if (msgs[i].type == WireType::text_delta) out += *msgs[i].text;
    return out;
}

} // namespace

TEST_SUITE("server") {

TEST_CASE("a voiced reply streams emotion, text, audio, then end") {
    ScriptedServe serve;
    serve.add_reply(serve.emotion_reply("happy", "hi there"));
    const auto r = run_session(serve.config(), {chunk_line(), end_line("question")});

    REQUIRE(!r.messages.empty());
    CHECK(r.messages.front().type == WireType::emotion);
    CHECK(r.messages.front().label == "happy");
    CHECK(joined_text(r.messages) == "hi there");

    std::vector<std::uint32_t> chunk_sizes;
    std::size_t pcm_samples = 0;
    for (const WireMessage& m : r.messages)
        if (m.type == WireType::audio_chunk) {
            chunk_sizes.push_back(*m.frames);
            pcm_samples += base64_to_pcm16(*m.pcm).size();
        }
    // 9 frames, offset by up to 7 steps, in 2-frame chunks plus a flush
    CHECK(chunk_sizes == std::vector<std::uint32_t>{2, 2, 2, 2, 1});
    CHECK(pcm_samples == 9 * 16);

    // emotion + 8 deltas + 5 chunks + end
    REQUIRE(r.messages.size() == 15);

    // the first chunk carries the placeholder waveform of the first two frames
    const ParallelSequence script =
        scripted_reply(serve.vocab, serve.emotion_reply("happy", "hi there"), 0);
    const std::vector<std::vector<token_id>> first_two = {script.frames[0].audio,
                                                          script.frames[1].audio};
    const auto* first_chunk = &r.messages[9];
    REQUIRE(first_chunk->type == WireType::audio_chunk);
    CHECK(*first_chunk->pcm == pcm16_to_base64(placeholder_pcm(first_two, 16)));

    CHECK(r.messages.back().type == WireType::end);
    CHECK(r.messages.back().reason == "ok");
    CHECK_FALSE(r.messages.back().detail.has_value());
}

TEST_CASE("a step budget marks the end message truncated") {
    ScriptedServe serve;
    serve.add_reply(serve.emotion_reply("happy", "hi there"));
    ServeConfig cfg = serve.config();
    cfg.max_steps = 10;
    const auto r = run_session(cfg, {chunk_line(), end_line("question")});
    CHECK(r.messages.back().type == WireType::end);
    CHECK(r.messages.back().reason == "truncated");
}

TEST_CASE("the gate rejects non-queries without decoding") {
    ScriptedServe serve;
    serve.add_reply(byte_tokens(serve.vocab, "unused"));

    SUBCASE("statements are declarative") {
        const auto r = run_session(serve.config(), {chunk_line(), end_line("statement")});
        REQUIRE(r.messages.size() == 1);
        CHECK(r.messages[0].type == WireType::end);
        CHECK(r.messages[0].reason == "gated_out");
        CHECK(r.messages[0].detail == "declarative");
    }
    SUBCASE("noise is an environmental sound") {
        const auto r = run_session(serve.config(), {chunk_line(), end_line("noise")});
        REQUIRE(r.messages.size() == 1);
        CHECK(r.messages[0].detail == "environmental_sound");
    }
    SUBCASE("an unlabeled query is answered") {
        const auto r = run_session(serve.config(),
                                   {chunk_line(), "{\"type\":\"end\"}"});
        CHECK(r.messages.back().reason == "ok");
        CHECK(joined_text(r.messages) == "unused");
    }
    SUBCASE("a gated query keeps the connection alive for the next one") {
        serve.add_reply(byte_tokens(serve.vocab, "second"));
        serve.add_reply(byte_tokens(serve.vocab, "third"));
        const auto r = run_session(serve.config(),
                                   {chunk_line(), end_line("noise"), chunk_line(),
                                    end_line("question"), chunk_line(), end_line("question")});
        CHECK(r.messages[0].reason == "gated_out");
        // the rejected query burns one scripted session; the next two answer
        CHECK(joined_text(r.messages) == "secondthird");
        CHECK(*serve.cursor == 3);
    }
}

TEST_CASE("protocol violations end the session with one error") {
    ScriptedServe serve;
    serve.add_reply(byte_tokens(serve.vocab, "unused"));

    SUBCASE("garbage line") {
        const auto r = run_session(serve.config(),
                                   {"garbage", chunk_line(), end_line("question")});
        REQUIRE(r.messages.size() == 1); // later lines never read
        CHECK(r.messages[0].type == WireType::error);
        CHECK(r.messages[0].message == "malformed message");
    }
    SUBCASE("server-only message type from the client") {
        const auto r = run_session(serve.config(),
                                   {encode_wire(make_text_delta("hi"))});
        REQUIRE(r.messages.size() == 1);
        CHECK(r.messages[0].message == "malformed message");
        CHECK(r.messages[0].detail == "unexpected client message: text_delta");
    }
    SUBCASE("broken base64 audio") {
        const auto r = run_session(
            serve.config(), {"{\"pcm\":\"!!\",\"type\":\"audio_chunk\"}"});
        REQUIRE(r.messages.size() == 1);
        CHECK(r.messages[0].message == "malformed message");
    }
    SUBCASE("unknown gate label") {
        const auto r = run_session(serve.config(), {chunk_line(), end_line("melody")});
        REQUIRE(r.messages.size() == 1);
        CHECK(r.messages[0].message == "malformed message");
        CHECK(r.messages[0].detail->find("unknown gate label") != std::string::npos);
    }
    SUBCASE("end before any audio") {
        const auto r = run_session(serve.config(), {end_line("question")});
        REQUIRE(r.messages.size() == 1);
        CHECK(r.messages[0].message == "empty_query");
        CHECK(r.messages[0].detail == "query carried no audio");
    }
}

TEST_CASE("a marker span becomes a tool call with a continuation turn") {
    ScriptedServe serve;
    std::vector<token_id> tool = byte_tokens(serve.vocab, "let me check ");
    tool.push_back(serve.vocab.reserved.tool_call_open);
    const auto payload = byte_tokens(
        serve.vocab, R"({"name":"web_search","arguments":{"query":"rain"}})");
    tool.insert(tool.end(), payload.begin(), payload.end());
    tool.push_back(serve.vocab.reserved.tool_call_close);
    serve.add_reply(tool, 2);
    serve.add_reply(byte_tokens(serve.vocab, "rain is coming"), 3);

    const auto r = run_session(serve.config(), {chunk_line(), end_line("question")});

    std::size_t call_at = 0;
    std::size_t calls = 0;
    for (std::size_t i = 0; i < r.messages.size(); ++i)
        if (r.messages[i].type == WireType::tool_call) {
            call_at = i;
            ++calls;
        }
    REQUIRE(calls == 1);
    CHECK(encode_wire(r.messages[call_at]) ==
          "{\"arguments\":{\"query\":\"rain\"},\"name\":\"web_search\","
          "\"type\":\"tool_call\"}\n");

    // the continuation decode streams after the call
    CHECK(joined_text(r.messages, call_at + 1) == "rain is coming");
    CHECK(r.messages.back().type == WireType::end);
    CHECK(r.messages.back().reason == "ok");
    CHECK(*serve.cursor == 2);
}

TEST_CASE("an unbalanced marker span is reported as a bad tool call") {
    ScriptedServe serve;
    std::vector<token_id> broken = byte_tokens(serve.vocab, "checking ");
    broken.push_back(serve.vocab.reserved.tool_call_open);
    const auto tail = byte_tokens(serve.vocab, "never closed");
    broken.insert(broken.end(), tail.begin(), tail.end());
    serve.add_reply(broken);

    const auto r = run_session(serve.config(), {chunk_line(), end_line("question")});
    CHECK(r.messages.back().type == WireType::error);
    CHECK(r.messages.back().message == "bad tool call");
}

TEST_CASE("the session is strictly half-duplex") {
    std::string probe;
    lucy::testing::run_golden_session([&](char c) { probe.push_back(c); });
    CHECK(std::regex_match(probe, std::regex("(R+W+)+R*")));
    // two lines per query, plus the read that sees end-of-stream
    CHECK(std::count(probe.begin(), probe.end(), 'R') == 7);
}

TEST_CASE("the canonical exchange matches the golden transcript byte for byte") {
    const std::string transcript = lucy::testing::run_golden_session();
    const std::string path = std::string(LUCY_TEST_DIR) + "/golden/serve_transcript.ndjson";

    if (std::getenv("LUCY_UPDATE_GOLDEN")) {
        std::ofstream out(path, std::ios::binary);
        out << transcript;
        REQUIRE(out.good());
    }
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing golden file; run once with LUCY_UPDATE_GOLDEN=1");
    std::ostringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == transcript);
}

TEST_CASE("serve config is validated up front") {
    ScriptedServe serve;
    SUBCASE("missing vocab") {
        ServeConfig cfg = serve.config();
        cfg.vocab = nullptr;
        CHECK_THROWS_AS(cfg.validate(), config_error);
    }
    SUBCASE("missing factory") {
        ServeConfig cfg = serve.config();
        cfg.make_predictor = nullptr;
        CHECK_THROWS_AS(cfg.validate(), config_error);
    }
    SUBCASE("pattern arity mismatch") {
        ServeConfig cfg = serve.config();
        cfg.pattern = DelayPattern::cumulative(3);
        CHECK_THROWS_AS(cfg.validate(), shape_error);
    }
    SUBCASE("zero chunk frames") {
        ServeConfig cfg = serve.config();
        cfg.chunk_frames = 0;
        CHECK_THROWS_AS(cfg.validate(), config_error);
    }
    SUBCASE("bad samples per frame") {
        ServeConfig cfg = serve.config();
        cfg.samples_per_frame = 0;
        CHECK_THROWS_AS(cfg.validate(), config_error);
    }
}

TEST_CASE("the tcp front end serves the same bytes as the in-process session") {
    ScriptedServe serve;
    serve.add_reply(serve.emotion_reply("happy", "hi there"), 0);
    serve.add_reply(byte_tokens(serve.vocab, "x"), 1);
    std::vector<token_id> tool = byte_tokens(serve.vocab, "let me check ");
    tool.push_back(serve.vocab.reserved.tool_call_open);
    const auto payload = byte_tokens(
        serve.vocab, R"({"name":"web_search","arguments":{"query":"rain"}})");
    tool.insert(tool.end(), payload.begin(), payload.end());
    tool.push_back(serve.vocab.reserved.tool_call_close);
    serve.add_reply(tool, 2);
    serve.add_reply(byte_tokens(serve.vocab, "rain is coming"), 3);

    NdjsonServer server(serve.config());
    server.bind_listen("127.0.0.1:0");
    REQUIRE(server.port() > 0);
    std::thread worker([&] { server.serve_once(); });

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(server.port()));
    inet_pton(AF_INET, "127.0.0.1", &sa.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0);

    std::string request;
    for (const std::string& line : lucy::testing::golden_client_lines()) request += line;
    REQUIRE(::send(fd, request.data(), request.size(), 0) ==
            static_cast<ssize_t>(request.size()));
    ::shutdown(fd, SHUT_WR);

    std::string response;
    char buf[4096];
    ssize_t n;
    while ((n = ::recv(fd, buf, sizeof(buf), 0)) > 0) response.append(buf, std::size_t(n));
    ::close(fd);
    worker.join();

    CHECK(response == lucy::testing::run_golden_session());
}

TEST_CASE("listen address parsing rejects bad input") {
    ScriptedServe serve;
    serve.add_reply(byte_tokens(serve.vocab, "x"));
    NdjsonServer server(serve.config());
    CHECK_THROWS_AS(server.bind_listen("nocolon"), config_error);
    CHECK_THROWS_AS(server.bind_listen("127.0.0.1:notaport"), config_error);
    CHECK_THROWS_AS(server.bind_listen("127.0.0.1:99999"), config_error);
    CHECK_THROWS_AS(server.bind_listen("300.1.2.3:0"), config_error);
    CHECK_THROWS_AS(server.serve_once(), state_error);
}

} // TEST_SUITE("server")
