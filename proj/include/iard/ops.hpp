#pragma once

#include <utility>
#include <vector>

#include "iard/tensor.hpp"

namespace iard {

// x: [Cin, T], w: [Cout, Cin, k], b: [Cout] -> [Cout, T].
// Input is left-padded with k-1 zeros, so output[t] depends on x[0..t] only.
GradTensor causal_conv1d(const GradTensor& x, const GradTensor& w, const GradTensor& b);

// Strided downsampling, kernel 2 stride 2. x: [Cin, T] (T even) -> [Cout, T/2].
GradTensor down_conv2(const GradTensor& x, const GradTensor& w, const GradTensor& b);

// Nearest-neighbor upsampling: [C, T] -> [C, 2T], out[2t] = out[2t+1] = x[t].
GradTensor upsample2_nn(const GradTensor& x);

GradTensor conv1x1(const GradTensor& x, const GradTensor& w, const GradTensor& b);

GradTensor concat_channels(const GradTensor& a, const GradTensor& b);
GradTensor add(const GradTensor& a, const GradTensor& b);
GradTensor leaky_relu(const GradTensor& x, double slope = 0.1);

struct LstmParams {
    // Gate order along the 4H axis: input, forget, candidate, output.
    GradTensor wx;  // [4H, D]
    GradTensor wh;  // [4H, H]
    GradTensor b;   // [4H]
};

// Single cell step: x_t [D], h/c [H] -> (h', c').
std::pair<GradTensor, GradTensor> lstm_step(const GradTensor& x_t, const GradTensor& h,
                                            const GradTensor& c, const LstmParams& p);

// Unrolled sequence application: x [D, T] -> h sequence [H, T], with final state out.
GradTensor lstm_seq(const GradTensor& x, const LstmParams& p, const GradTensor& h0,
                    const GradTensor& c0);

// Mean absolute difference; subgradient 0 at exact ties.
GradTensor l1_loss(const GradTensor& pred, const GradTensor& target);

// -10*log10(|s_t|^2 / |pred - s_t|^2) with s_t the projection of pred onto
// target; denominators clamped at eps = 1e-8.
GradTensor si_snr_loss(const GradTensor& pred, const GradTensor& target);

}  // namespace iard
