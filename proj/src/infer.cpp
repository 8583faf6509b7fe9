#include "iard/infer.hpp"

#include <algorithm>
#include <cmath>

namespace iard {

namespace {

template <typename T>
typename InferParams<T>::Conv conv_of(const GradTensor& w, const GradTensor& b) {
    typename InferParams<T>::Conv c;
    c.cout = w.shape()[0];
    c.cin = w.shape()[1];
    c.k = w.shape()[2];
    c.w.assign(w.values().begin(), w.values().end());
    c.b.assign(b.values().begin(), b.values().end());
    return c;
}

// Keep the last (k-1) input samples per channel for the next chunk.
template <typename T>
void update_ctx(std::vector<T>& ctx, const std::vector<T>& x, std::size_t t_len, std::size_t cin,
                std::size_t h) {
    if (h == 0) return;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        T* cr = ctx.data() + ci * h;
        const T* xr = x.data() + ci * t_len;
        if (t_len >= h) {
            for (std::size_t i = 0; i < h; ++i) cr[i] = xr[t_len - h + i];
        } else {
            const std::size_t keep = h - t_len;
            for (std::size_t i = 0; i < keep; ++i) cr[i] = cr[i + t_len];
            for (std::size_t i = 0; i < t_len; ++i) cr[keep + i] = xr[i];
        }
    }
}

template <typename T>
std::size_t dec_in_ch(const ModelConfig& cfg, std::size_t k) {
    return cfg.channels[std::min(k + 1, cfg.scales - 1)] + cfg.channels[k];
}

}  // namespace

template <typename T>
InferParams<T> to_infer_params(const ModelParams& params) {
    InferParams<T> p;
    p.cfg = params.cfg;
    p.in = conv_of<T>(params.in_w, params.in_b);
    p.pre = conv_of<T>(params.pre_w, params.pre_b);
    p.post = conv_of<T>(params.post_w, params.post_b);
    p.out = conv_of<T>(params.out_w, params.out_b);
    for (const auto& e : params.enc) {
        p.enc_conv.push_back(conv_of<T>(e.conv_w, e.conv_b));
        p.enc_down.push_back(conv_of<T>(e.down_w, e.down_b));
    }
    for (const auto& d : params.dec) p.dec_conv.push_back(conv_of<T>(d.conv_w, d.conv_b));
    p.lstm_wx.assign(params.lstm.wx.values().begin(), params.lstm.wx.values().end());
    p.lstm_wh.assign(params.lstm.wh.values().begin(), params.lstm.wh.values().end());
    p.lstm_b.assign(params.lstm.b.values().begin(), params.lstm.b.values().end());
    return p;
}

template <typename T>
std::vector<T> infer_forward(const InferParams<T>& p, const std::vector<T>& input) {
    using namespace infer_detail;
    const ModelConfig& cfg = p.cfg;
    const std::size_t ch_in = cfg.input_channels();
    if (input.size() % ch_in != 0) throw DimensionError("infer_forward: bad input size");
    const std::size_t t_len = input.size() / ch_in;
    if (t_len == 0 || t_len % cfg.chunk() != 0)
        throw DimensionError("infer_forward: length not a positive multiple of 2^K");

    const std::vector<T> no_ctx;
    std::vector<T> x, tmp;
    causal_conv_ctx<T>(p.in, input, t_len, no_ctx, x);
    std::vector<std::vector<T>> skips(cfg.scales);
    std::size_t len = t_len;
    for (std::size_t k = 0; k < cfg.scales; ++k) {
        causal_conv_ctx<T>(p.enc_conv[k], x, len, no_ctx, tmp);
        lrelu_inplace(tmp);
        skips[k] = tmp;
        down2<T>(p.enc_down[k], tmp, len, x);
        len /= 2;
    }

    causal_conv_ctx<T>(p.pre, x, len, no_ctx, tmp);  // [H, frames]
    const std::size_t hh = cfg.lstm_width;
    std::vector<T> h(hh, T(0)), c(hh, T(0)), x_t(hh), scratch;
    std::vector<T> seq(hh * len);
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t u = 0; u < hh; ++u) x_t[u] = tmp[u * len + t];
        lstm_cell_step(p, x_t.data(), h, c, scratch);
        for (std::size_t u = 0; u < hh; ++u) seq[u * len + t] = h[u];
    }
    causal_conv_ctx<T>(p.post, seq, len, no_ctx, x);

    for (std::size_t k = cfg.scales; k-- > 0;) {
        const std::size_t up_ch = cfg.channels[std::min(k + 1, cfg.scales - 1)];
        std::vector<T> cat((up_ch + cfg.channels[k]) * len * 2);
        for (std::size_t ci = 0; ci < up_ch; ++ci)
            for (std::size_t t = 0; t < len; ++t) {
                cat[ci * len * 2 + 2 * t] = x[ci * len + t];
                cat[ci * len * 2 + 2 * t + 1] = x[ci * len + t];
            }
        len *= 2;
        std::copy(skips[k].begin(), skips[k].end(), cat.begin() + up_ch * len);
        causal_conv_ctx<T>(p.dec_conv[k], cat, len, no_ctx, x);
        lrelu_inplace(x);
    }

    causal_conv_ctx<T>(p.out, x, t_len, no_ctx, tmp);
    return tmp;
}

template <typename T>
std::vector<T> free_run_offline(const InferParams<T>& p, const std::vector<T>& noisy,
                                std::size_t* forward_passes) {
    const ModelConfig& cfg = p.cfg;
    const std::size_t chunk = cfg.chunk();
    if (noisy.empty() || noisy.size() % chunk != 0)
        throw DimensionError("free_run_offline: length not a positive multiple of 2^K");
    const std::size_t n_chunks = noisy.size() / chunk;
    std::vector<T> out(noisy.size(), T(0));
    std::size_t passes = 0;
    for (std::size_t i = 0; i < n_chunks; ++i) {
        const std::size_t plen = (i + 1) * chunk;
        std::vector<T> input;
        if (cfg.ar_enabled) {
            input.assign(2 * plen, T(0));
            std::copy(noisy.begin(), noisy.begin() + plen, input.begin());
            for (std::size_t t = chunk; t < plen; ++t) input[plen + t] = out[t - chunk];
        } else {
            input.assign(noisy.begin(), noisy.begin() + plen);
        }
        std::vector<T> y = infer_forward(p, input);
        ++passes;
        std::copy(y.begin() + i * chunk, y.end(), out.begin() + i * chunk);
    }
    if (forward_passes) *forward_passes = passes;
    return out;
}

template <typename T>
StreamEngine<T>::StreamEngine(InferParams<T> params) : p_(std::move(params)) {
    p_.cfg.validate();
    reset();
}

template <typename T>
void StreamEngine<T>::reset() {
    const ModelConfig& cfg = p_.cfg;
    const std::size_t h = cfg.kernel - 1;
    enc_ctx_.assign(cfg.scales, {});
    dec_ctx_.assign(cfg.scales, {});
    for (std::size_t k = 0; k < cfg.scales; ++k) {
        enc_ctx_[k].assign(cfg.channels[k] * h, T(0));
        dec_ctx_[k].assign(dec_in_ch<T>(cfg, k) * h, T(0));
    }
    lstm_h_.assign(cfg.lstm_width, T(0));
    lstm_c_.assign(cfg.lstm_width, T(0));
    ar_ring_.assign(cfg.chunk(), T(0));
    skips_.assign(cfg.scales, {});
    chunks_ = 0;
}

template <typename T>
void StreamEngine<T>::process_chunk(const T* noisy_chunk, T* out) {
    using namespace infer_detail;
    const ModelConfig& cfg = p_.cfg;
    const std::size_t chunk = cfg.chunk();
    const std::size_t h = cfg.kernel - 1;
    const std::vector<T> no_ctx;

    std::vector<T>& x = buf_a_;
    std::vector<T>& tmp = buf_b_;
    std::vector<T> input;
    if (cfg.ar_enabled) {
        input.assign(2 * chunk, T(0));
        std::copy(noisy_chunk, noisy_chunk + chunk, input.begin());
        std::copy(ar_ring_.begin(), ar_ring_.end(), input.begin() + chunk);
    } else {
        input.assign(noisy_chunk, noisy_chunk + chunk);
    }

    causal_conv_ctx<T>(p_.in, input, chunk, no_ctx, x);
    std::size_t len = chunk;
    for (std::size_t k = 0; k < cfg.scales; ++k) {
        causal_conv_ctx<T>(p_.enc_conv[k], x, len, enc_ctx_[k], tmp);
        update_ctx(enc_ctx_[k], x, len, cfg.channels[k], h);
        lrelu_inplace(tmp);
        skips_[k] = tmp;
        down2<T>(p_.enc_down[k], tmp, len, x);
        len /= 2;
    }

    // One LSTM frame per chunk by construction.
    causal_conv_ctx<T>(p_.pre, x, 1, no_ctx, tmp);
    lstm_cell_step(p_, tmp.data(), lstm_h_, lstm_c_, scratch_);
    std::vector<T> seq(lstm_h_);
    causal_conv_ctx<T>(p_.post, seq, 1, no_ctx, x);

    for (std::size_t k = cfg.scales; k-- > 0;) {
        const std::size_t up_ch = cfg.channels[std::min(k + 1, cfg.scales - 1)];
        std::vector<T> cat((up_ch + cfg.channels[k]) * len * 2);
        for (std::size_t ci = 0; ci < up_ch; ++ci)
            for (std::size_t t = 0; t < len; ++t) {
                cat[ci * len * 2 + 2 * t] = x[ci * len + t];
                cat[ci * len * 2 + 2 * t + 1] = x[ci * len + t];
            }
        len *= 2;
        std::copy(skips_[k].begin(), skips_[k].end(), cat.begin() + up_ch * len);
        causal_conv_ctx<T>(p_.dec_conv[k], cat, len, dec_ctx_[k], x);
        update_ctx(dec_ctx_[k], cat, len, up_ch + cfg.channels[k], h);
        lrelu_inplace(x);
    }

    causal_conv_ctx<T>(p_.out, x, chunk, no_ctx, tmp);
    std::copy(tmp.begin(), tmp.end(), out);
    std::copy(tmp.begin(), tmp.end(), ar_ring_.begin());
    ++chunks_;
}

template <typename T>
std::vector<T> StreamEngine<T>::process_chunk(const std::vector<T>& noisy_chunk) {
    if (noisy_chunk.size() != chunk_size())
        throw DimensionError("process_chunk: expected exactly " + std::to_string(chunk_size()) +
                             " samples, got " + std::to_string(noisy_chunk.size()));
    std::vector<T> out(chunk_size());
    process_chunk(noisy_chunk.data(), out.data());
    return out;
}

template struct InferParams<float>;
template struct InferParams<double>;
template InferParams<float> to_infer_params<float>(const ModelParams&);
template InferParams<double> to_infer_params<double>(const ModelParams&);
template std::vector<float> infer_forward(const InferParams<float>&, const std::vector<float>&);
template std::vector<double> infer_forward(const InferParams<double>&, const std::vector<double>&);
template std::vector<float> free_run_offline(const InferParams<float>&, const std::vector<float>&,
                                             std::size_t*);
template std::vector<double> free_run_offline(const InferParams<double>&,
                                              const std::vector<double>&, std::size_t*);
template class StreamEngine<float>;
template class StreamEngine<double>;

}  // namespace iard
