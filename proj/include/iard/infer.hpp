#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "iard/model.hpp"

namespace iard {

// Tape-free weights in inference precision. Layout mirrors ModelParams.
template <typename T>
struct InferParams {
    ModelConfig cfg;
    struct Conv {
        std::vector<T> w, b;
        std::size_t cout = 0, cin = 0, k = 0;
    };
    Conv in, pre, post, out;
    std::vector<Conv> enc_conv, enc_down, dec_conv;
    std::vector<T> lstm_wx, lstm_wh, lstm_b;  // [4H,H], [4H,H], [4H]
};

template <typename T>
InferParams<T> to_infer_params(const ModelParams& params);

namespace infer_detail {

template <typename T>
inline T sigmoid(T z) {
    return T(1) / (T(1) + std::exp(-z));
}

// y[co][t] = b[co] + sum_{ci,j} w[co][ci][j] * x[ci][t-(k-1)+j], with the
// left context taken from `ctx` ((k-1) samples per channel) instead of zeros.
template <typename T>
void causal_conv_ctx(const typename InferParams<T>::Conv& c, const std::vector<T>& x,
                     std::size_t t_len, const std::vector<T>& ctx, std::vector<T>& y) {
    const std::size_t k = c.k, cin = c.cin, cout = c.cout, h = k - 1;
    y.assign(cout * t_len, T(0));
    for (std::size_t co = 0; co < cout; ++co) {
        T* yr = y.data() + co * t_len;
        for (std::size_t t = 0; t < t_len; ++t) yr[t] = c.b[co];
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const T* xr = x.data() + ci * t_len;
            const T* cr = ctx.empty() ? nullptr : ctx.data() + ci * h;
            const T* wr = c.w.data() + (co * cin + ci) * k;
            for (std::size_t j = 0; j < k; ++j) {
                const std::size_t lag = k - 1 - j;
                const T wj = wr[j];
                for (std::size_t t = lag; t < t_len; ++t) yr[t] += wj * xr[t - lag];
                if (cr)
                    for (std::size_t t = 0; t < std::min(lag, t_len); ++t)
                        yr[t] += wj * cr[h - lag + t];
            }
        }
    }
}

template <typename T>
void down2(const typename InferParams<T>::Conv& c, const std::vector<T>& x, std::size_t t_len,
           std::vector<T>& y) {
    const std::size_t cin = c.cin, cout = c.cout, t_out = t_len / 2;
    y.assign(cout * t_out, T(0));
    for (std::size_t co = 0; co < cout; ++co) {
        T* yr = y.data() + co * t_out;
        for (std::size_t t = 0; t < t_out; ++t) yr[t] = c.b[co];
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const T* xr = x.data() + ci * t_len;
            const T w0 = c.w[(co * cin + ci) * 2];
            const T w1 = c.w[(co * cin + ci) * 2 + 1];
            for (std::size_t t = 0; t < t_out; ++t) yr[t] += w0 * xr[2 * t] + w1 * xr[2 * t + 1];
        }
    }
}

template <typename T>
void lrelu_inplace(std::vector<T>& x) {
    for (T& v : x) v = v >= T(0) ? v : T(0.1) * v;
}

template <typename T>
void lstm_cell_step(const InferParams<T>& p, const T* x_t, std::vector<T>& h, std::vector<T>& c,
                    std::vector<T>& scratch) {
    const std::size_t hh = p.cfg.lstm_width;
    scratch.assign(4 * hh, T(0));
    for (std::size_t r = 0; r < 4 * hh; ++r) {
        T acc = p.lstm_b[r];
        const T* wxr = p.lstm_wx.data() + r * hh;
        for (std::size_t j = 0; j < hh; ++j) acc += wxr[j] * x_t[j];
        const T* whr = p.lstm_wh.data() + r * hh;
        for (std::size_t j = 0; j < hh; ++j) acc += whr[j] * h[j];
        scratch[r] = acc;
    }
    for (std::size_t u = 0; u < hh; ++u) {
        const T gi = sigmoid(scratch[u]);
        const T gf = sigmoid(scratch[hh + u]);
        const T gg = std::tanh(scratch[2 * hh + u]);
        const T go = sigmoid(scratch[3 * hh + u]);
        c[u] = gf * c[u] + gi * gg;
        h[u] = go * std::tanh(c[u]);
    }
}

}  // namespace infer_detail

// Monolithic forward in inference precision: input [ch, T] flattened
// row-major, T a multiple of 2^K. Zero initial state, as in model_forward.
template <typename T>
std::vector<T> infer_forward(const InferParams<T>& p, const std::vector<T>& input);

// Chunked free-running reference: re-runs infer_forward on growing prefixes,
// AR channel filled from previously emitted chunks. Deliberately O(n^2).
template <typename T>
std::vector<T> free_run_offline(const InferParams<T>& p, const std::vector<T>& noisy,
                                std::size_t* forward_passes = nullptr);

// Per-stream carryover: conv left contexts, LSTM state, AR ring of the last
// 2^K outputs. Cost of process_chunk is independent of stream history.
template <typename T>
class StreamEngine {
public:
    explicit StreamEngine(InferParams<T> params);

    void reset();
    std::size_t chunk_size() const { return p_.cfg.chunk(); }

    // noisy_chunk/out: exactly 2^K samples. AR channel = previous output chunk.
    void process_chunk(const T* noisy_chunk, T* out);
    std::vector<T> process_chunk(const std::vector<T>& noisy_chunk);

    std::size_t chunks_processed() const { return chunks_; }
    const std::vector<T>& ar_ring() const { return ar_ring_; }
    const std::vector<T>& lstm_h() const { return lstm_h_; }
    const std::vector<T>& lstm_c() const { return lstm_c_; }

private:
    InferParams<T> p_;
    std::vector<std::vector<T>> enc_ctx_;  // per-scale causal conv left context
    std::vector<std::vector<T>> dec_ctx_;
    std::vector<T> lstm_h_, lstm_c_;
    std::vector<T> ar_ring_;
    std::size_t chunks_ = 0;
    std::vector<T> buf_a_, buf_b_, scratch_;
    std::vector<std::vector<T>> skips_;
};

extern template struct InferParams<float>;
extern template struct InferParams<double>;
extern template InferParams<float> to_infer_params<float>(const ModelParams&);
extern template InferParams<double> to_infer_params<double>(const ModelParams&);
extern template std::vector<float> infer_forward(const InferParams<float>&,
                                                 const std::vector<float>&);
extern template std::vector<double> infer_forward(const InferParams<double>&,
                                                  const std::vector<double>&);
extern template std::vector<float> free_run_offline(const InferParams<float>&,
                                                    const std::vector<float>&, std::size_t*);
extern template std::vector<double> free_run_offline(const InferParams<double>&,
                                                     const std::vector<double>&, std::size_t*);
extern template class StreamEngine<float>;
extern template class StreamEngine<double>;

}  // namespace iard
