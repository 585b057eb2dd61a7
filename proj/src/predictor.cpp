#include "lucy/predictor.hpp"
#include "lucy/errors.hpp"

#include <cmath>
#include <limits>

namespace lucy {

void StepPrediction::validate(const VocabSpec& spec) const {
    if (layers.size() != spec.num_layers())
        throw shape_error("prediction must cover " + std::to_string(spec.num_layers()) +
                          " layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const std::size_t want = k == 0 ? spec.text_vocab_size : spec.audio_vocab_size;
        if (layers[k].size() != want)
            throw shape_error("layer " + std::to_string(k) + " distribution has wrong size");
        double sum = 0.0;
        for (double p : layers[k]) {
            if (p < 0) throw domain_error("negative probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw domain_error("layer " + std::to_string(k) + " distribution sums to " +
                               std::to_string(sum));
    }
}

ScriptedPredictor::ScriptedPredictor(const VocabSpec& spec, DelayedGrid target, double epsilon)
    : spec_(&spec), target_(std::move(target)), epsilon_(epsilon) {
    for (const ParallelFrame& frame : target_)
        if (frame.arity() != spec.num_layers())
            throw shape_error("scripted grid arity does not match vocab layers");
    if (epsilon_ < 0 || epsilon_ >= 1) throw domain_error("epsilon must be in [0, 1)");
}

std::unique_ptr<ScriptedPredictor> ScriptedPredictor::from_file(const VocabSpec& spec,
                                                                const std::string& path,
                                                                double epsilon) {
    return std::make_unique<ScriptedPredictor>(spec, load_frames(path), epsilon);
}

namespace {

std::vector<double> spiked(std::size_t size, token_id hot, double epsilon) {
    std::vector<double> dist(size, size > 1 ? epsilon / double(size - 1) : 0.0);
    dist[hot] = size > 1 ? 1.0 - epsilon : 1.0;
    return dist;
}

} // namespace

StepPrediction ScriptedPredictor::step(std::span<const ParallelFrame>) {
    ParallelFrame frame;
    if (position_ < target_.size()) {
        frame = target_[position_];
    } else {
        // Script exhausted: stop the text layer, pad the audio layers.
        frame.text = spec_->reserved.eos;
        frame.audio.assign(spec_->num_audio_layers, spec_->reserved.pad_audio);
    }
    ++position_;

    StepPrediction pred;
    pred.layers.reserve(spec_->num_layers());
    pred.layers.push_back(spiked(spec_->text_vocab_size, frame.text, epsilon_));
    for (token_id id : frame.audio)
        pred.layers.push_back(spiked(spec_->audio_vocab_size, id, epsilon_));
    return pred;
}

std::unique_ptr<Predictor> ScriptedPredictor::clone() const {
    auto copy = std::make_unique<ScriptedPredictor>(*spec_, target_, epsilon_);
    copy->position_ = position_;
    return copy;
}

StepPrediction UniformPredictor::step(std::span<const ParallelFrame>) {
    StepPrediction pred;
    pred.layers.reserve(spec_->num_layers());
    pred.layers.emplace_back(spec_->text_vocab_size, 1.0 / spec_->text_vocab_size);
    for (std::uint32_t k = 0; k < spec_->num_audio_layers; ++k)
        pred.layers.emplace_back(spec_->audio_vocab_size, 1.0 / spec_->audio_vocab_size);
    return pred;
}

ParallelFrame greedy_step(const StepPrediction& pred) {
    if (pred.layers.empty()) throw shape_error("prediction has no layers");
    ParallelFrame frame;
    for (std::size_t k = 0; k < pred.layers.size(); ++k) {
        const auto& dist = pred.layers[k];
        if (dist.empty()) throw shape_error("empty distribution");
        std::size_t best = 0;
        for (std::size_t i = 1; i < dist.size(); ++i)
            if (dist[i] > dist[best]) best = i; // strict >, so ties keep the lowest id
        if (k == 0)
            frame.text = static_cast<token_id>(best);
        else
            frame.audio.push_back(static_cast<token_id>(best));
    }
    return frame;
}

namespace {

// 53-bit uniform in [0,1), fully determined by the mt19937_64 stream.
double next_unit(std::mt19937_64& rng) {
    return double(rng() >> 11) * 0x1.0p-53;
}

token_id draw(const std::vector<double>& dist, std::mt19937_64& rng) {
    const double u = next_unit(rng);
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] > 0) last_positive = i;
        cum += dist[i];
        if (u < cum) return static_cast<token_id>(i);
    }
    return static_cast<token_id>(last_positive); // rounding slack at the top end
}

} // namespace

ParallelFrame sample_step(const StepPrediction& pred, std::mt19937_64& rng) {
    if (pred.layers.empty()) throw shape_error("prediction has no layers");
    ParallelFrame frame;
    frame.text = draw(pred.layers[0], rng);
    for (std::size_t k = 1; k < pred.layers.size(); ++k)
        frame.audio.push_back(draw(pred.layers[k], rng));
    return frame;
}

NllScore nll_score(Predictor& pred, const ParallelSequence& target, const DelayPattern& pat,
                   token_id pad_text, token_id pad_audio) {
    pred.reset();
    const DelayedGrid grid = apply_delay(target, pat, pad_text, pad_audio);

    NllScore score;
    for (std::size_t t = 0; t < grid.size(); ++t) {
        const StepPrediction step = pred.step({grid.data(), t});
        if (step.layers.size() != grid[t].arity())
            throw shape_error("prediction arity does not match target grid");
        for (std::size_t k = 0; k < step.layers.size(); ++k) {
            const token_id want = k == 0 ? grid[t].text : grid[t].audio[k - 1];
            if (want >= step.layers[k].size())
                throw range_error("target token outside predicted distribution");
            const double p = step.layers[k][want];
            if (p <= 0.0) {
                score.nats = std::numeric_limits<double>::infinity();
                score.degenerate = true;
                return score;
            }
            score.nats -= std::log(p);
        }
    }
    return score;
}

} // namespace lucy
