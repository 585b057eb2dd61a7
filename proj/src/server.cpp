#include "lucy/server.hpp"
#include "lucy/errors.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace lucy {

void ServeConfig::validate() const {
    if (!vocab) throw config_error("serve config has no vocab");
    if (!make_predictor) throw config_error("serve config has no predictor factory");
    pattern.validate();
    if (pattern.arity() != vocab->num_layers())
        throw shape_error("delay pattern arity does not match vocab layers");
    if (chunk_frames == 0) throw config_error("chunk_frames must be >= 1");
    if (samples_per_frame <= 0) throw config_error("samples_per_frame must be positive");
}

namespace {

struct ClientQuery {
    std::size_t chunks = 0;
    std::size_t samples = 0;
    std::optional<std::string> label;
    bool eof = false;
    bool bad = false;
    std::string bad_detail;
};

ClientQuery read_query(const ServeConfig& cfg, const WireChannel& channel) {
    ClientQuery q;
    std::string line;
    while (true) {
        if (cfg.io_probe) cfg.io_probe('R');
        if (!channel.read_line(line)) {
            q.eof = true;
            return q;
        }
        WireMessage msg;
        try {
            msg = decode_wire(line);
        } catch (const parse_error& e) {
            q.bad = true;
            q.bad_detail = e.what();
            return q;
        }
        switch (msg.type) {
            case WireType::audio_chunk:
                try {
                    q.samples += base64_to_pcm16(msg.pcm.value_or("")).size();
                } catch (const parse_error& e) {
                    q.bad = true;
                    q.bad_detail = e.what();
                    return q;
                }
                q.chunks += 1;
                break;
            case WireType::end:
                q.label = msg.label;
                return q;
            default:
                q.bad = true;
                q.bad_detail = std::string("unexpected client message: ") +
                               wire_type_name(msg.type);
                return q;
        }
    }
}

DecodeConfig decode_config_of(const ServeConfig& cfg) {
    DecodeConfig dcfg;
    dcfg.vocab = cfg.vocab;
    dcfg.pattern = cfg.pattern;
    dcfg.chunk_frames = cfg.chunk_frames;
    dcfg.max_steps = cfg.max_steps;
    return dcfg;
}

// Streams decode events as wire messages while collecting the outcome;
// the end message is left to the caller (tool calls may extend the turn).
DecodeOutcome stream_decode(const ServeConfig& cfg, DecodeSession& session,
                            const SerializedPrompt& prompt, const WireChannel& channel) {
    DecodeOutcome out;
    auto write = [&](const WireMessage& msg) {
        if (cfg.io_probe) cfg.io_probe('W');
        channel.write_line(encode_wire(msg));
    };
    session.decode_stream(prompt, [&](const DecodeEvent& ev) {
        if (const auto* delta = std::get_if<TextDelta>(&ev)) {
            out.text.push_back(delta->token);
            const token_id one[1] = {delta->token};
            write(make_text_delta(render_text(*cfg.vocab, one)));
        } else if (const auto* emo = std::get_if<EmotionDetected>(&ev)) {
            out.emotion = emo->label;
            write(make_emotion(emo->label));
        } else if (const auto* chunk = std::get_if<AudioChunk>(&ev)) {
            out.audio.insert(out.audio.end(), chunk->frames.begin(), chunk->frames.end());
            write(make_audio_chunk(placeholder_pcm(chunk->frames, cfg.samples_per_frame),
                                   static_cast<std::uint32_t>(chunk->frames.size())));
        } else if (const auto* done = std::get_if<DoneEvent>(&ev)) {
            out.truncated = done->truncated;
            out.steps = done->steps;
        }
    });
    return out;
}

} // namespace

void handle_session(const ServeConfig& cfg, const WireChannel& channel) {
    cfg.validate();
    LabeledPassthroughClassifier passthrough;
    const GateClassifier* classifier = cfg.classifier ? cfg.classifier : &passthrough;

    ConversationState state(*cfg.vocab, cfg.speaker);
    auto write = [&](const WireMessage& msg) {
        if (cfg.io_probe) cfg.io_probe('W');
        channel.write_line(encode_wire(msg));
    };

    std::size_t query_index = 0;
    while (true) {
        const ClientQuery query = read_query(cfg, channel);
        if (query.eof) return;
        if (query.bad) {
            write(make_error("malformed message", query.bad_detail));
            return;
        }
        if (query.chunks == 0) {
            write(make_error("empty_query", "query carried no audio"));
            return;
        }

        DecodeSession session(decode_config_of(cfg), cfg.make_predictor());
        GateInput input;
        input.label = query.label;
        input.num_samples = query.samples;
        GateDecision decision;
        try {
            decision = gate(classifier, input, session, cfg.gate_threshold);
        } catch (const data_error& e) {
            write(make_error("malformed message", e.what()));
            return;
        }
        if (!decision.respond) {
            write(make_end("gated_out", gate_reason_name(decision.reason)));
            ++query_index;
            continue; // history untouched: the turn was never taken
        }

        state.push_user_speech("wire:" + std::to_string(query_index));
        DecodeOutcome outcome = stream_decode(cfg, session, state.serialize_prompt(), channel);

        std::optional<ToolCall> call;
        try {
            call = extract_tool_call(*cfg.vocab, outcome.text);
        } catch (const parse_error& e) {
            write(make_error("bad tool call", e.what()));
            return;
        }
        state.commit_response(outcome.text, std::move(outcome.audio), outcome.emotion);

        bool truncated = outcome.truncated;
        if (call) {
            write(make_tool_call(call->name, call->arguments));
            const std::string payload = cfg.tools && cfg.tools->has(call->name)
                                            ? cfg.tools->call(call->name, call->arguments)
                                            : tool_fallback_text(call->name);
            state.push_tool_text(encode_text(*cfg.vocab, payload));
            DecodeSession continuation(decode_config_of(cfg), cfg.make_predictor());
            DecodeOutcome after =
                stream_decode(cfg, continuation, state.serialize_prompt(), channel);
            state.commit_response(after.text, std::move(after.audio), after.emotion);
            truncated = truncated || after.truncated;
        }
        write(make_end(truncated ? "truncated" : "ok"));
        ++query_index;
    }
}

// ---- TCP front end ----

NdjsonServer::NdjsonServer(ServeConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
}

NdjsonServer::~NdjsonServer() {
    stop();
}

void NdjsonServer::bind_listen(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos)
        throw config_error("listen address must be host:port, got " + addr);
    std::string host = addr.substr(0, colon);
    const std::string port_text = addr.substr(colon + 1);
    if (host.empty()) host = "0.0.0.0";
    int port = 0;
    try {
        port = std::stoi(port_text);
    } catch (const std::exception&) {
        throw config_error("bad port in listen address: " + addr);
    }
    if (port < 0 || port > 65535) throw config_error("port out of range: " + port_text);

    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(port));
    if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1)
        throw config_error("bad host in listen address: " + host);

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw state_error("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw state_error("bind() failed for " + addr + ": " + std::strerror(errno));
    }
    if (::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw state_error("listen() failed");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = static_cast<int>(ntohs(bound.sin_port));
}

void NdjsonServer::handle_fd(int fd) {
    WireChannel channel;
    channel.read_line = [fd, buffer = std::string()](std::string& line) mutable {
        while (true) {
            const auto pos = buffer.find('\n');
            if (pos != std::string::npos) {
                line = buffer.substr(0, pos);
                buffer.erase(0, pos + 1);
                return true;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
            if (n <= 0) return false; // EOF or error; partial trailing line dropped
            buffer.append(chunk, static_cast<std::size_t>(n));
        }
    };
    channel.write_line = [fd](std::string_view bytes) {
        std::size_t sent = 0;
        while (sent < bytes.size()) {
            const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
            if (n <= 0) throw state_error("send() failed");
            sent += static_cast<std::size_t>(n);
        }
    };
    try {
        handle_session(cfg_, channel);
    } catch (const std::exception&) {
        // connection-level failure: drop the connection, keep serving
    }
    ::close(fd);
}

void NdjsonServer::serve_once() {
    if (listen_fd_ < 0) throw state_error("server is not listening");
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) throw state_error("accept() failed");
    handle_fd(fd);
}

void NdjsonServer::run() {
    if (listen_fd_ < 0) throw state_error("server is not listening");
    while (!stopping_.load()) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (stopping_.load()) break;
            continue;
        }
        workers_.emplace_back([this, fd] { handle_fd(fd); });
    }
}

void NdjsonServer::stop() {
    stopping_.store(true);
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    workers_.clear(); // jthread joins on destruction
}

} // namespace lucy
