// Latency accounting with injected clocks: per-run stamps, averaged reports,
// and a deterministic bench scenario driving a real decode session.
#pragma once

#include "lucy/decoder.hpp"

#include <json.hpp>

#include <memory>
#include <span>
#include <vector>

namespace lucy {

struct Clock {
    virtual ~Clock() = default;
    virtual double now() = 0; // seconds, monotonic
};

struct SystemClock final : Clock {
    double now() override;
};

struct FakeClock final : Clock {
    double t = 0.0;

    double now() override { return t; }
    void advance(double dt) { t += dt; }
};

// Wall-clock stamps for one query/response exchange.
struct RunStamps {
    double send_complete = 0.0;       // client finished sending the query
    double receipt_complete = 0.0;    // server finished reading the query
    double first_audio_chunk = 0.0;   // server emitted the first audio chunk
    double first_response_byte = 0.0; // client saw the first response byte
    std::vector<double> step_seconds; // per predictor step

    bool valid() const;
};

struct LatencyReport {
    double total_s = 0.0;           // send_complete -> first_response_byte
    double first_chunk_s = 0.0;     // receipt_complete -> first_audio_chunk
    double per_step_s = 0.0;        // mean predictor step time
    double derived_network_s = 0.0; // total_s - first_chunk_s, exact
    std::size_t runs = 0;           // valid runs averaged
    bool partial = false;           // some runs were dropped as invalid
};

// Means over the valid runs; derived_network_s is computed from the averaged
// totals so the subtraction identity holds exactly. Throws domain_error when
// no run is valid.
LatencyReport measure_latency(std::span<const RunStamps> stamps);

// Report plus raw stamps, so alternative decompositions stay possible.
nlohmann::json latency_report_json(const LatencyReport& report,
                                   std::span<const RunStamps> stamps);

// Wraps a predictor so every step advances a fake clock by a fixed cost and
// is recorded into a RunStamps step list.
class TimedPredictor final : public Predictor {
public:
    TimedPredictor(std::unique_ptr<Predictor> inner, Clock& clock, FakeClock* advance,
                   double step_cost_s, std::vector<double>* step_log);

    StepPrediction step(std::span<const ParallelFrame> context) override;
    void reset() override;
    std::unique_ptr<Predictor> clone() const override;

private:
    std::unique_ptr<Predictor> inner_;
    Clock* clock_;
    FakeClock* advance_;
    double step_cost_s_;
    std::vector<double>* step_log_;
};

// Simulated half-duplex exchange: fixed uplink/downlink transit plus a fixed
// per-step compute cost, driven through a real DecodeSession on a fake clock.
struct BenchScenario {
    double uplink_s = 0.05;
    double downlink_s = 0.05;
    double step_cost_s = 0.02;
    std::size_t script_frames = 32;
    std::uint32_t chunk_frames = 2;
    std::uint64_t seed = 7;
};

LatencyReport bench_latency(std::size_t runs, const BenchScenario& scenario,
                            std::vector<RunStamps>* out_stamps = nullptr);

} // namespace lucy
