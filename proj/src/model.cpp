#include "iard/model.hpp"

#include <cmath>
#include <random>

namespace iard {

namespace {

std::size_t enc_down_out(const ModelConfig& cfg, std::size_t k) {
    return cfg.channels[std::min(k + 1, cfg.scales - 1)];
}

std::size_t dec_in_channels(const ModelConfig& cfg, std::size_t k) {
    return enc_down_out(cfg, k) + cfg.channels[k];
}

GradTensor flatten(const GradTensor& x) {
    auto n = detail::make_node({x.size()}, x.values(), x.tracked());
    if (x.tracked()) {
        n->parents = {x.node()};
        n->backward_fn = [](detail::Node& self) {
            auto& p = *self.parents[0];
            for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
        };
    }
    return GradTensor(n);
}

}  // namespace

void ModelConfig::validate() const {
    if (scales < 1) throw DimensionError("ModelConfig: K must be >= 1");
    if (kernel < 1) throw DimensionError("ModelConfig: N must be >= 1");
    if (channels.size() != scales)
        throw DimensionError("ModelConfig: len(C) = " + std::to_string(channels.size()) +
                             " does not match K = " + std::to_string(scales));
    for (std::size_t c : channels)
        if (c < 1) throw DimensionError("ModelConfig: channel counts must be >= 1");
    if (lstm_width < 1) throw DimensionError("ModelConfig: lstm_width must be >= 1");
    if (sample_rate == 0) throw DimensionError("ModelConfig: sample_rate must be > 0");
}

std::size_t algorithmic_latency_samples(const ModelConfig& cfg) { return cfg.chunk(); }

double algorithmic_latency_ms(const ModelConfig& cfg) {
    return 1000.0 * static_cast<double>(cfg.chunk()) / static_cast<double>(cfg.sample_rate);
}

double count_macs_per_second(const ModelConfig& cfg) {
    const double r = static_cast<double>(cfg.sample_rate);
    const std::size_t kk = cfg.scales;
    const double h = static_cast<double>(cfg.lstm_width);
    double macs = static_cast<double>(cfg.input_channels() * cfg.channels[0]) * r;  // input 1x1
    for (std::size_t k = 0; k < kk; ++k) {
        const double rk = r / static_cast<double>(std::size_t(1) << k);
        const double ck = static_cast<double>(cfg.channels[k]);
        macs += ck * ck * static_cast<double>(cfg.kernel) * rk;               // encoder conv
        macs += ck * static_cast<double>(enc_down_out(cfg, k)) * 2.0 * rk / 2.0;  // down conv
        macs += static_cast<double>(dec_in_channels(cfg, k)) * ck *
                static_cast<double>(cfg.kernel) * rk;  // decoder conv
    }
    const double rb = r / static_cast<double>(cfg.chunk());
    const double cb = static_cast<double>(cfg.channels[kk - 1]);
    macs += cb * h * rb;            // bottleneck in projection
    macs += 4.0 * h * (h + h) * rb;  // lstm gates
    macs += h * cb * rb;            // bottleneck out projection
    macs += static_cast<double>(cfg.channels[0]) * r;  // output 1x1
    return macs;
}

std::vector<GradTensor*> ModelParams::parameters() {
    std::vector<GradTensor*> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
}

std::vector<std::pair<std::string, GradTensor*>> ModelParams::named_parameters() {
    std::vector<std::pair<std::string, GradTensor*>> out;
    out.emplace_back("in.w", &in_w);
    out.emplace_back("in.b", &in_b);
    for (std::size_t k = 0; k < enc.size(); ++k) {
        const std::string base = "enc" + std::to_string(k);
        out.emplace_back(base + ".conv.w", &enc[k].conv_w);
        out.emplace_back(base + ".conv.b", &enc[k].conv_b);
        out.emplace_back(base + ".down.w", &enc[k].down_w);
        out.emplace_back(base + ".down.b", &enc[k].down_b);
    }
    out.emplace_back("pre.w", &pre_w);
    out.emplace_back("pre.b", &pre_b);
    out.emplace_back("lstm.wx", &lstm.wx);
    out.emplace_back("lstm.wh", &lstm.wh);
    out.emplace_back("lstm.b", &lstm.b);
    out.emplace_back("post.w", &post_w);
    out.emplace_back("post.b", &post_b);
    for (std::size_t k = 0; k < dec.size(); ++k) {
        const std::string base = "dec" + std::to_string(k);
        out.emplace_back(base + ".conv.w", &dec[k].conv_w);
        out.emplace_back(base + ".conv.b", &dec[k].conv_b);
    }
    out.emplace_back("out.w", &out_w);
    out.emplace_back("out.b", &out_b);
    return out;
}

std::size_t ModelParams::parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->size();
    return n;
}

void ModelParams::set_tracked(bool tracked) {
    for (auto* p : parameters()) p->node()->tracked = tracked;
}

void ModelParams::zero_grads() {
    for (auto* p : parameters()) p->zero_grad();
}

ModelParams ModelParams::clone() const {
    ModelParams out;
    out.cfg = cfg;
    out.init_seed = init_seed;
    auto copy = [](const GradTensor& t) {
        return GradTensor::leaf(t.shape(), t.values(), t.tracked());
    };
    out.in_w = copy(in_w);
    out.in_b = copy(in_b);
    for (const auto& e : enc)
        out.enc.push_back({copy(e.conv_w), copy(e.conv_b), copy(e.down_w), copy(e.down_b)});
    out.pre_w = copy(pre_w);
    out.pre_b = copy(pre_b);
    out.lstm = {copy(lstm.wx), copy(lstm.wh), copy(lstm.b)};
    out.post_w = copy(post_w);
    out.post_b = copy(post_b);
    for (const auto& d : dec) out.dec.push_back({copy(d.conv_w), copy(d.conv_b)});
    out.out_w = copy(out_w);
    out.out_b = copy(out_b);
    return out;
}

ModelParams build_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    auto weight = [&rng](Shape shape, std::size_t fan_in) {
        const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<double> v(numel(shape));
        for (double& x : v) x = dist(rng);
        return GradTensor::leaf(std::move(shape), std::move(v), true);
    };
    auto bias = [](std::size_t n) { return GradTensor::zeros({n}, true); };

    ModelParams p;
    p.cfg = cfg;
    p.init_seed = seed;
    const std::size_t kk = cfg.scales;
    const std::size_t h = cfg.lstm_width;
    const std::size_t n = cfg.kernel;

    p.in_w = weight({cfg.channels[0], cfg.input_channels(), 1}, cfg.input_channels());
    p.in_b = bias(cfg.channels[0]);
    for (std::size_t k = 0; k < kk; ++k) {
        const std::size_t ck = cfg.channels[k];
        const std::size_t cd = enc_down_out(cfg, k);
        EncoderScale e;
        e.conv_w = weight({ck, ck, n}, ck * n);
        e.conv_b = bias(ck);
        e.down_w = weight({cd, ck, 2}, ck * 2);
        e.down_b = bias(cd);
        p.enc.push_back(std::move(e));
    }
    const std::size_t cb = cfg.channels[kk - 1];
    p.pre_w = weight({h, cb, 1}, cb);
    p.pre_b = bias(h);
    p.lstm.wx = weight({4 * h, h}, h);
    p.lstm.wh = weight({4 * h, h}, h);
    p.lstm.b = bias(4 * h);
    p.post_w = weight({cb, h, 1}, h);
    p.post_b = bias(cb);
    for (std::size_t k = 0; k < kk; ++k) {
        const std::size_t cin = dec_in_channels(cfg, k);
        DecoderScale d;
        d.conv_w = weight({cfg.channels[k], cin, n}, cin * n);
        d.conv_b = bias(cfg.channels[k]);
        p.dec.push_back(std::move(d));
    }
    p.out_w = weight({1, cfg.channels[0], 1}, cfg.channels[0]);
    p.out_b = bias(1);
    return p;
}

GradTensor model_forward(ModelParams& params, const GradTensor& input) {
    const ModelConfig& cfg = params.cfg;
    if (input.shape().size() != 2 || input.shape()[0] != cfg.input_channels())
        throw DimensionError("model_forward: expected [" +
                             std::to_string(cfg.input_channels()) + ", T] input");
    const std::size_t t_len = input.shape()[1];
    if (t_len == 0 || t_len % cfg.chunk() != 0)
        throw DimensionError("model_forward: length " + std::to_string(t_len) +
                             " is not a positive multiple of 2^K = " + std::to_string(cfg.chunk()));

    GradTensor x = conv1x1(input, params.in_w, params.in_b);
    std::vector<GradTensor> skips;
    for (std::size_t k = 0; k < cfg.scales; ++k) {
        GradTensor h = leaky_relu(causal_conv1d(x, params.enc[k].conv_w, params.enc[k].conv_b));
        skips.push_back(h);
        x = down_conv2(h, params.enc[k].down_w, params.enc[k].down_b);
    }

    GradTensor u = conv1x1(x, params.pre_w, params.pre_b);
    GradTensor seq = lstm_seq(u, params.lstm, GradTensor::zeros({cfg.lstm_width}),
                              GradTensor::zeros({cfg.lstm_width}));
    x = conv1x1(seq, params.post_w, params.post_b);

    for (std::size_t k = cfg.scales; k-- > 0;) {
        GradTensor up = upsample2_nn(x);
        GradTensor cat = concat_channels(up, skips[k]);
        x = leaky_relu(causal_conv1d(cat, params.dec[k].conv_w, params.dec[k].conv_b));
    }
    return flatten(conv1x1(x, params.out_w, params.out_b));
}

GradTensor assemble_ar_input(const std::vector<double>& noisy, const std::vector<double>& ar_source,
                             std::size_t latency) {
    if (noisy.size() != ar_source.size())
        throw DimensionError("assemble_ar_input: length mismatch " +
                             std::to_string(noisy.size()) + " vs " +
                             std::to_string(ar_source.size()));
    const std::size_t t_len = noisy.size();
    std::vector<double> v(2 * t_len, 0.0);
    std::copy(noisy.begin(), noisy.end(), v.begin());
    for (std::size_t t = latency; t < t_len; ++t) v[t_len + t] = ar_source[t - latency];
    return GradTensor::leaf({2, t_len}, std::move(v));
}

}  // namespace iard
