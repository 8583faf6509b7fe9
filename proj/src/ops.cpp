#include "iard/ops.hpp"

#include <algorithm>
#include <cmath>

namespace iard {

namespace {

using detail::Node;
using detail::make_node;

constexpr double kSiSnrEps = 1e-8;

GradTensor record(Shape shape, std::vector<double> value,
                  std::vector<std::shared_ptr<Node>> parents,
                  std::function<void(Node&)> backward_fn) {
    bool tracked = false;
    for (auto& p : parents)
        if (p->tracked) tracked = true;
    auto n = make_node(std::move(shape), std::move(value), tracked);
    if (tracked) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return GradTensor(n);
}

void check_conv_shapes(const GradTensor& x, const GradTensor& w, const GradTensor& b,
                       const char* op) {
    if (x.shape().size() != 2 || w.shape().size() != 3 || b.shape().size() != 1)
        throw DimensionError(std::string(op) + ": expected x [Cin,T], w [Cout,Cin,k], b [Cout]");
    if (w.shape()[1] != x.shape()[0])
        throw DimensionError(std::string(op) + ": input channels " + std::to_string(x.shape()[0]) +
                             " vs kernel channels " + std::to_string(w.shape()[1]));
    if (b.shape()[0] != w.shape()[0])
        throw DimensionError(std::string(op) + ": bias/kernel output channel mismatch");
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

GradTensor causal_conv1d(const GradTensor& x, const GradTensor& w, const GradTensor& b) {
    check_conv_shapes(x, w, b, "causal_conv1d");
    const std::size_t cin = x.shape()[0], t_len = x.shape()[1];
    const std::size_t cout = w.shape()[0], k = w.shape()[2];
    if (k < 1) throw DimensionError("causal_conv1d: kernel size must be >= 1");

    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    std::vector<double> y(cout * t_len);
    for (std::size_t co = 0; co < cout; ++co) {
        double* yr = y.data() + co * t_len;
        std::fill(yr, yr + t_len, bv[co]);
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xr = xv.data() + ci * t_len;
            const double* wr = wv.data() + (co * cin + ci) * k;
            for (std::size_t j = 0; j < k; ++j) {
                const std::size_t lag = k - 1 - j;  // taps reach into the past only
                const double wj = wr[j];
                for (std::size_t t = lag; t < t_len; ++t) yr[t] += wj * xr[t - lag];
            }
        }
    }

    return record(
        {cout, t_len}, std::move(y), {x.node(), w.node(), b.node()},
        [cin, t_len, cout, k](Node& self) {
            const auto& gy = self.grad;
            auto& xn = *self.parents[0];
            auto& wn = *self.parents[1];
            auto& bn = *self.parents[2];
            for (std::size_t co = 0; co < cout; ++co) {
                const double* gr = gy.data() + co * t_len;
                double sum = 0.0;
                for (std::size_t t = 0; t < t_len; ++t) sum += gr[t];
                bn.grad[co] += sum;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const double* xr = xn.value.data() + ci * t_len;
                    double* gxr = xn.grad.data() + ci * t_len;
                    const double* wr = wn.value.data() + (co * cin + ci) * k;
                    double* gwr = wn.grad.data() + (co * cin + ci) * k;
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::size_t lag = k - 1 - j;
                        const double wj = wr[j];
                        double wsum = 0.0;
                        for (std::size_t t = lag; t < t_len; ++t) {
                            wsum += gr[t] * xr[t - lag];
                            gxr[t - lag] += wj * gr[t];
                        }
                        gwr[j] += wsum;
                    }
                }
            }
        });
}

GradTensor down_conv2(const GradTensor& x, const GradTensor& w, const GradTensor& b) {
    check_conv_shapes(x, w, b, "down_conv2");
    if (w.shape()[2] != 2) throw DimensionError("down_conv2: kernel size must be 2");
    const std::size_t cin = x.shape()[0], t_len = x.shape()[1];
    if (t_len % 2 != 0)
        throw DimensionError("down_conv2: odd input length " + std::to_string(t_len));
    const std::size_t cout = w.shape()[0], t_out = t_len / 2;

    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    std::vector<double> y(cout * t_out);
    for (std::size_t co = 0; co < cout; ++co) {
        double* yr = y.data() + co * t_out;
        std::fill(yr, yr + t_out, bv[co]);
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xr = xv.data() + ci * t_len;
            const double w0 = wv[(co * cin + ci) * 2];
            const double w1 = wv[(co * cin + ci) * 2 + 1];
            for (std::size_t t = 0; t < t_out; ++t) yr[t] += w0 * xr[2 * t] + w1 * xr[2 * t + 1];
        }
    }

    return record(
        {cout, t_out}, std::move(y), {x.node(), w.node(), b.node()},
        [cin, t_len, cout, t_out](Node& self) {
            const auto& gy = self.grad;
            auto& xn = *self.parents[0];
            auto& wn = *self.parents[1];
            auto& bn = *self.parents[2];
            for (std::size_t co = 0; co < cout; ++co) {
                const double* gr = gy.data() + co * t_out;
                double sum = 0.0;
                for (std::size_t t = 0; t < t_out; ++t) sum += gr[t];
                bn.grad[co] += sum;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const double* xr = xn.value.data() + ci * t_len;
                    double* gxr = xn.grad.data() + ci * t_len;
                    const double w0 = wn.value[(co * cin + ci) * 2];
                    const double w1 = wn.value[(co * cin + ci) * 2 + 1];
                    double gw0 = 0.0, gw1 = 0.0;
                    for (std::size_t t = 0; t < t_out; ++t) {
                        gw0 += gr[t] * xr[2 * t];
                        gw1 += gr[t] * xr[2 * t + 1];
                        gxr[2 * t] += w0 * gr[t];
                        gxr[2 * t + 1] += w1 * gr[t];
                    }
                    wn.grad[(co * cin + ci) * 2] += gw0;
                    wn.grad[(co * cin + ci) * 2 + 1] += gw1;
                }
            }
        });
}

GradTensor upsample2_nn(const GradTensor& x) {
    if (x.shape().size() != 2) throw DimensionError("upsample2_nn: expected [C, T]");
    const std::size_t ch = x.shape()[0], t_len = x.shape()[1];
    const auto& xv = x.values();
    std::vector<double> y(ch * 2 * t_len);
    for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t t = 0; t < t_len; ++t) {
            const double v = xv[c * t_len + t];
            y[c * 2 * t_len + 2 * t] = v;
            y[c * 2 * t_len + 2 * t + 1] = v;
        }
    return record({ch, 2 * t_len}, std::move(y), {x.node()}, [ch, t_len](Node& self) {
        auto& xn = *self.parents[0];
        for (std::size_t c = 0; c < ch; ++c)
            for (std::size_t t = 0; t < t_len; ++t)
                xn.grad[c * t_len + t] +=
                    self.grad[c * 2 * t_len + 2 * t] + self.grad[c * 2 * t_len + 2 * t + 1];
    });
}

GradTensor conv1x1(const GradTensor& x, const GradTensor& w, const GradTensor& b) {
    if (w.shape().size() != 3 || w.shape()[2] != 1)
        throw DimensionError("conv1x1: kernel must have size 1");
    return causal_conv1d(x, w, b);
}

GradTensor concat_channels(const GradTensor& a, const GradTensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[1])
        throw DimensionError("concat_channels: length mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const std::size_t ca = a.shape()[0], cb = b.shape()[0], t_len = a.shape()[1];
    std::vector<double> y;
    y.reserve((ca + cb) * t_len);
    y.insert(y.end(), a.values().begin(), a.values().end());
    y.insert(y.end(), b.values().begin(), b.values().end());
    return record({ca + cb, t_len}, std::move(y), {a.node(), b.node()},
                  [ca, cb, t_len](Node& self) {
                      auto& an = *self.parents[0];
                      auto& bn = *self.parents[1];
                      for (std::size_t i = 0; i < ca * t_len; ++i) an.grad[i] += self.grad[i];
                      for (std::size_t i = 0; i < cb * t_len; ++i)
                          bn.grad[i] += self.grad[ca * t_len + i];
                  });
}

GradTensor add(const GradTensor& a, const GradTensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    std::vector<double> y(a.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + b.values()[i];
    return record(a.shape(), std::move(y), {a.node(), b.node()}, [](Node& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            an.grad[i] += self.grad[i];
            bn.grad[i] += self.grad[i];
        }
    });
}

GradTensor leaky_relu(const GradTensor& x, double slope) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = x.values()[i];
        y[i] = v >= 0.0 ? v : slope * v;
    }
    return record(x.shape(), std::move(y), {x.node()}, [slope](Node& self) {
        auto& xn = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            xn.grad[i] += (xn.value[i] >= 0.0 ? 1.0 : slope) * self.grad[i];
    });
}

namespace {

// Fused LSTM cell producing [h'; c'] stacked as a [2H] node.
GradTensor lstm_cell(const GradTensor& x_t, const GradTensor& h, const GradTensor& c,
                     const LstmParams& p) {
    const std::size_t d = x_t.shape()[0];
    const std::size_t hh = h.shape()[0];
    if (p.wx.shape() != Shape{4 * hh, d} || p.wh.shape() != Shape{4 * hh, hh} ||
        p.b.shape() != Shape{4 * hh} || c.shape() != Shape{hh})
        throw DimensionError("lstm_step: parameter/state shape mismatch");

    const auto& xv = x_t.values();
    const auto& hv = h.values();
    const auto& cv = c.values();
    const auto& wxv = p.wx.values();
    const auto& whv = p.wh.values();
    const auto& bv = p.b.values();

    std::vector<double> z(4 * hh);
    for (std::size_t r = 0; r < 4 * hh; ++r) {
        double acc = bv[r];
        const double* wxr = wxv.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) acc += wxr[j] * xv[j];
        const double* whr = whv.data() + r * hh;
        for (std::size_t j = 0; j < hh; ++j) acc += whr[j] * hv[j];
        z[r] = acc;
    }

    std::vector<double> gi(hh), gf(hh), gg(hh), go(hh), tc(hh);
    std::vector<double> out(2 * hh);
    for (std::size_t u = 0; u < hh; ++u) {
        gi[u] = sigmoid(z[u]);
        gf[u] = sigmoid(z[hh + u]);
        gg[u] = std::tanh(z[2 * hh + u]);
        go[u] = sigmoid(z[3 * hh + u]);
        const double cn = gf[u] * cv[u] + gi[u] * gg[u];
        tc[u] = std::tanh(cn);
        out[u] = go[u] * tc[u];
        out[hh + u] = cn;
    }

    return record(
        {2 * hh}, std::move(out),
        {x_t.node(), h.node(), c.node(), p.wx.node(), p.wh.node(), p.b.node()},
        [d, hh, gi = std::move(gi), gf = std::move(gf), gg = std::move(gg), go = std::move(go),
         tc = std::move(tc)](Node& self) {
            auto& xn = *self.parents[0];
            auto& hn = *self.parents[1];
            auto& cn = *self.parents[2];
            auto& wxn = *self.parents[3];
            auto& whn = *self.parents[4];
            auto& bn = *self.parents[5];
            std::vector<double> dz(4 * hh);
            for (std::size_t u = 0; u < hh; ++u) {
                const double ghu = self.grad[u];
                const double dc = self.grad[hh + u] + ghu * go[u] * (1.0 - tc[u] * tc[u]);
                const double di = dc * gg[u];
                const double df = dc * cn.value[u];
                const double dg = dc * gi[u];
                const double dout = ghu * tc[u];
                cn.grad[u] += dc * gf[u];
                dz[u] = di * gi[u] * (1.0 - gi[u]);
                dz[hh + u] = df * gf[u] * (1.0 - gf[u]);
                dz[2 * hh + u] = dg * (1.0 - gg[u] * gg[u]);
                dz[3 * hh + u] = dout * go[u] * (1.0 - go[u]);
            }
            for (std::size_t r = 0; r < 4 * hh; ++r) {
                const double dzr = dz[r];
                bn.grad[r] += dzr;
                double* gwx = wxn.grad.data() + r * d;
                const double* wxr = wxn.value.data() + r * d;
                for (std::size_t j = 0; j < d; ++j) {
                    gwx[j] += dzr * xn.value[j];
                    xn.grad[j] += dzr * wxr[j];
                }
                double* gwh = whn.grad.data() + r * hh;
                const double* whr = whn.value.data() + r * hh;
                for (std::size_t j = 0; j < hh; ++j) {
                    gwh[j] += dzr * hn.value[j];
                    hn.grad[j] += dzr * whr[j];
                }
            }
        });
}

GradTensor slice1d(const GradTensor& x, std::size_t offset, std::size_t len) {
    std::vector<double> y(x.values().begin() + offset, x.values().begin() + offset + len);
    return record({len}, std::move(y), {x.node()}, [offset, len](Node& self) {
        auto& xn = *self.parents[0];
        for (std::size_t i = 0; i < len; ++i) xn.grad[offset + i] += self.grad[i];
    });
}

// Column t of a [C, T] tensor as a [C] vector.
GradTensor column(const GradTensor& x, std::size_t t) {
    const std::size_t ch = x.shape()[0], t_len = x.shape()[1];
    std::vector<double> y(ch);
    for (std::size_t c = 0; c < ch; ++c) y[c] = x.values()[c * t_len + t];
    return record({ch}, std::move(y), {x.node()}, [ch, t_len, t](Node& self) {
        auto& xn = *self.parents[0];
        for (std::size_t c = 0; c < ch; ++c) xn.grad[c * t_len + t] += self.grad[c];
    });
}

}  // namespace

std::pair<GradTensor, GradTensor> lstm_step(const GradTensor& x_t, const GradTensor& h,
                                            const GradTensor& c, const LstmParams& p) {
    const std::size_t hh = h.shape()[0];
    GradTensor cell = lstm_cell(x_t, h, c, p);
    return {slice1d(cell, 0, hh), slice1d(cell, hh, hh)};
}

GradTensor lstm_seq(const GradTensor& x, const LstmParams& p, const GradTensor& h0,
                    const GradTensor& c0) {
    if (x.shape().size() != 2) throw DimensionError("lstm_seq: expected [D, T]");
    const std::size_t t_len = x.shape()[1];
    const std::size_t hh = h0.shape()[0];

    GradTensor h = h0, c = c0;
    std::vector<GradTensor> hs;
    hs.reserve(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        auto [hn, cn] = lstm_step(column(x, t), h, c, p);
        h = hn;
        c = cn;
        hs.push_back(hn);
    }

    std::vector<double> y(hh * t_len);
    std::vector<std::shared_ptr<detail::Node>> parents;
    parents.reserve(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t u = 0; u < hh; ++u) y[u * t_len + t] = hs[t].values()[u];
        parents.push_back(hs[t].node());
    }
    return record({hh, t_len}, std::move(y), std::move(parents), [hh, t_len](Node& self) {
        for (std::size_t t = 0; t < t_len; ++t) {
            auto& hn = *self.parents[t];
            for (std::size_t u = 0; u < hh; ++u) hn.grad[u] += self.grad[u * t_len + t];
        }
    });
}

GradTensor l1_loss(const GradTensor& pred, const GradTensor& target) {
    if (pred.shape() != target.shape())
        throw DimensionError("l1_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    const std::size_t n = pred.size();
    if (n == 0) throw DimensionError("l1_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(pred.values()[i] - target.values()[i]);
    return record({1}, {acc / static_cast<double>(n)}, {pred.node(), target.node()},
                  [n](Node& self) {
                      auto& pn = *self.parents[0];
                      auto& tn = *self.parents[1];
                      const double g = self.grad[0] / static_cast<double>(n);
                      for (std::size_t i = 0; i < n; ++i) {
                          const double diff = pn.value[i] - tn.value[i];
                          const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                          pn.grad[i] += g * s;
                          tn.grad[i] -= g * s;
                      }
                  });
}

GradTensor si_snr_loss(const GradTensor& pred, const GradTensor& target) {
    if (pred.shape() != target.shape())
        throw DimensionError("si_snr_loss: shape mismatch");
    const std::size_t n = pred.size();
    const auto& pv = pred.values();
    const auto& tv = target.values();
    double dot = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += pv[i] * tv[i];
        ss += tv[i] * tv[i];
    }
    const double ss_c = std::max(ss, kSiSnrEps);
    const double alpha = dot / ss_c;
    double num = 0.0, den = 0.0, es = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double st = alpha * tv[i];
        const double e = pv[i] - st;
        num += st * st;
        den += e * e;
        es += e * tv[i];
    }
    const double num_c = std::max(num, kSiSnrEps * kSiSnrEps);
    const double den_c = std::max(den, kSiSnrEps * kSiSnrEps);
    const double loss = -10.0 * std::log10(num_c / den_c);

    return record(
        {1}, {loss}, {pred.node(), target.node()},
        [n, alpha, num, den, num_c, den_c, ss_c, es](Node& self) {
            auto& pn = *self.parents[0];
            auto& tn = *self.parents[1];
            const double g = self.grad[0];
            const double k = -10.0 / std::log(10.0) * g;
            const double cn = (num > kSiSnrEps * kSiSnrEps) ? 1.0 / num_c : 0.0;
            const double cd = (den > kSiSnrEps * kSiSnrEps) ? 1.0 / den_c : 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double st = alpha * tn.value[i];
                const double e = pn.value[i] - st;
                const double dnum_dp = 2.0 * alpha * tn.value[i];
                const double dden_dp = 2.0 * (e - (es / ss_c) * tn.value[i]);
                pn.grad[i] += k * (cn * dnum_dp - cd * dden_dp);
                const double dalpha_dt = pn.value[i] / ss_c - 2.0 * alpha * tn.value[i] / ss_c;
                const double dnum_dt = 2.0 * alpha * pn.value[i] - 2.0 * alpha * alpha * tn.value[i];
                const double dden_dt = -2.0 * dalpha_dt * es - 2.0 * alpha * e;
                tn.grad[i] += k * (cn * dnum_dt - cd * dden_dt);
            }
        });
}

}  // namespace iard
