// The model abstraction: one categorical distribution per layer at each
// step. Scripted and uniform implementations drive the runtime without
// trained weights; the scorer computes the teacher-forced parallel NLL.
#pragma once

#include "lucy/framing.hpp"
#include "lucy/vocab.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

namespace lucy {

// Per-layer categorical distributions: index 0 is the text head, 1..N the
// audio heads. Each vector sums to 1 within 1e-9 with entries >= 0.
struct StepPrediction {
    std::vector<std::vector<double>> layers;

    void validate(const VocabSpec& spec) const;
};

// Deterministic given identical context and seed; cheap to clone so
// batch-parallel decoding can run lanes concurrently or sequentially with
// identical results.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual StepPrediction step(std::span<const ParallelFrame> context) = 0;
    virtual void reset() = 0;
    virtual std::unique_ptr<Predictor> clone() const = 0;
};

// Replays a delayed grid step by step as one-hot (or epsilon-smoothed)
// distributions; past the end it emits eos on the text layer and audio pads.
// Greedy decode of a ScriptedPredictor reproduces its grid exactly.
class ScriptedPredictor : public Predictor {
public:
    ScriptedPredictor(const VocabSpec& spec, DelayedGrid target, double epsilon = 0.0);
    static std::unique_ptr<ScriptedPredictor> from_file(const VocabSpec& spec,
                                                        const std::string& path,
                                                        double epsilon = 0.0);

    StepPrediction step(std::span<const ParallelFrame> context) override;
    void reset() override { position_ = 0; }
    std::unique_ptr<Predictor> clone() const override;

    const DelayedGrid& target() const { return target_; }

private:
    const VocabSpec* spec_;
    DelayedGrid target_;
    double epsilon_;
    std::size_t position_ = 0;
};

// Uniform over every layer's vocabulary; context-free.
class UniformPredictor : public Predictor {
public:
    explicit UniformPredictor(const VocabSpec& spec) : spec_(&spec) {}
    StepPrediction step(std::span<const ParallelFrame> context) override;
    void reset() override {}
    std::unique_ptr<Predictor> clone() const override {
        return std::make_unique<UniformPredictor>(*spec_);
    }

private:
    const VocabSpec* spec_;
};

// Per-layer argmax; ties break toward the lowest id.
ParallelFrame greedy_step(const StepPrediction& pred);

// Per-layer independent draws from a seeded generator. The generator and
// the mapping to [0,1) are fixed, so draws replay identically everywhere.
ParallelFrame sample_step(const StepPrediction& pred, std::mt19937_64& rng);

struct NllScore {
    double nats = 0.0;
    bool degenerate = false; // some target token had zero probability

    bool operator==(const NllScore&) const = default;
};

// Teacher-forced negative log-likelihood of `target` under `pred`, summed
// over every delayed grid position and every layer. Empty target scores 0.
NllScore nll_score(Predictor& pred, const ParallelSequence& target, const DelayPattern& pat,
                   token_id pad_text, token_id pad_audio);

} // namespace lucy
