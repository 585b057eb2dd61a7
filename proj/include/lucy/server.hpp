// Streaming half-duplex NDJSON service: a transport-free session handler
// (used directly by golden tests) and a plain TCP front end.
#pragma once

#include "lucy/conversation.hpp"
#include "lucy/decoder.hpp"
#include "lucy/wire.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace lucy {

struct ServeConfig {
    const VocabSpec* vocab = nullptr;
    DelayPattern pattern;
    std::uint32_t chunk_frames = 2;
    std::size_t max_steps = 4096;
    double gate_threshold = 0.5;
    std::string speaker = "female";
    int samples_per_frame = kDefaultSamplesPerFrame;
    std::function<std::unique_ptr<Predictor>()> make_predictor; // one per decode
    const GateClassifier* classifier = nullptr; // null -> labeled passthrough
    const ToolRegistry* tools = nullptr;        // null -> tool calls get fallback text
    std::function<void(char)> io_probe;         // 'R' before reads, 'W' before writes

    void validate() const;
};

// Line transport abstraction. read_line returns false at end of stream and
// yields one complete line (no trailing newline). write_line sends the exact
// bytes given (wire encoding already carries its newline).
struct WireChannel {
    std::function<bool(std::string&)> read_line;
    std::function<void(std::string_view)> write_line;
};

// Runs the full connection loop: repeated query (audio_chunk* then end) ->
// gate -> decode -> streamed response, until end of stream or a protocol
// error. Strictly half-duplex: never reads while a response is in flight.
void handle_session(const ServeConfig& cfg, const WireChannel& channel);

class NdjsonServer {
public:
    explicit NdjsonServer(ServeConfig cfg);
    ~NdjsonServer();

    NdjsonServer(const NdjsonServer&) = delete;
    NdjsonServer& operator=(const NdjsonServer&) = delete;

    // addr is "host:port"; port 0 picks an ephemeral port (see port()).
    void bind_listen(const std::string& addr);
    int port() const { return port_; }

    void serve_once(); // accept and fully handle a single connection
    void run();        // accept loop, one thread per connection, until stop()
    void stop();

private:
    void handle_fd(int fd);

    ServeConfig cfg_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> stopping_{false};
    std::vector<std::jthread> workers_;
};

} // namespace lucy
