#pragma once

#include <cstdint>
#include <vector>

#include "iard/ops.hpp"
#include "iard/tensor.hpp"

namespace iard {

struct ModelConfig {
    std::size_t scales = 7;        // K: down/upsampling stages
    std::size_t kernel = 4;        // N: intra-scale causal conv kernel size
    std::vector<std::size_t> channels = {16, 24, 32, 48, 64, 96, 128};  // C, one per scale
    std::size_t lstm_width = 512;
    bool ar_enabled = false;
    std::size_t sample_rate = 16000;

    void validate() const;
    std::size_t chunk() const { return std::size_t(1) << scales; }  // L = 2^K
    std::size_t input_channels() const { return ar_enabled ? 2 : 1; }
};

// One chunk of future context per output sample.
std::size_t algorithmic_latency_samples(const ModelConfig& cfg);
double algorithmic_latency_ms(const ModelConfig& cfg);

// Analytic multiply-accumulates per second of audio.
double count_macs_per_second(const ModelConfig& cfg);

struct EncoderScale {
    GradTensor conv_w, conv_b;  // causal conv, kernel N
    GradTensor down_w, down_b;  // kernel 2, stride 2
};

struct DecoderScale {
    GradTensor conv_w, conv_b;  // causal conv over [upsampled ; skip]
};

struct ModelParams {
    ModelConfig cfg;
    std::uint64_t init_seed = 0;
    GradTensor in_w, in_b;      // conv1x1: input channels -> C[0]
    std::vector<EncoderScale> enc;
    GradTensor pre_w, pre_b;    // conv1x1: C[K-1] -> lstm_width
    LstmParams lstm;
    GradTensor post_w, post_b;  // conv1x1: lstm_width -> C[K-1]
    std::vector<DecoderScale> dec;  // dec[k] operates at scale k
    GradTensor out_w, out_b;    // conv1x1: C[0] -> 1

    std::vector<GradTensor*> parameters();
    std::vector<std::pair<std::string, GradTensor*>> named_parameters();
    std::size_t parameter_count();
    void set_tracked(bool tracked);
    void zero_grads();
    ModelParams clone() const;
};

// Uniform +-sqrt(1/fan_in) weights, zero biases, deterministic in seed.
ModelParams build_model(const ModelConfig& cfg, std::uint64_t seed);

// input: [1 or 2, T] with T a multiple of 2^K -> enhanced waveform [T].
GradTensor model_forward(ModelParams& params, const GradTensor& input);

// channel 0 = noisy, channel 1[t] = ar_source[t - L] (zeros for t < L).
GradTensor assemble_ar_input(const std::vector<double>& noisy, const std::vector<double>& ar_source,
                             std::size_t latency);

}  // namespace iard
