#include "evavoid/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evavoid {
namespace {

struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<double> d;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), d(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    double* ch(int i) { return d.data() + static_cast<std::size_t>(i) * plane(); }
    const double* ch(int i) const { return d.data() + static_cast<std::size_t>(i) * plane(); }
};

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// 3x3, stride 1, zero padding. Weights laid out [out][in][3][3].
// Input copied into a (h+2) x (w+2) plane per channel with a zero border.
std::vector<double> pad1(const Tensor& in) {
    const int pw = in.w + 2;
    const std::size_t pp = static_cast<std::size_t>(in.h + 2) * pw;
    std::vector<double> out(pp * in.c, 0.0);
    for (int i = 0; i < in.c; ++i)
        for (int y = 0; y < in.h; ++y)
            std::copy_n(in.ch(i) + static_cast<std::size_t>(y) * in.w, in.w,
                        out.data() + i * pp + static_cast<std::size_t>(y + 1) * pw + 1);
    return out;
}

Tensor conv3x3(const Tensor& in, const double* W, const double* b, int out_c) {
    Tensor out(out_c, in.h, in.w);
    const int H = in.h, Wd = in.w, pw = Wd + 2;
    const std::size_t pp = static_cast<std::size_t>(H + 2) * pw;
    const std::vector<double> padded = pad1(in);
    for (int o = 0; o < out_c; ++o) {
        double* dst = out.ch(o);
        std::fill(dst, dst + out.plane(), b[o]);
        for (int i = 0; i < in.c; ++i) {
            const double* k = W + (static_cast<std::size_t>(o) * in.c + i) * 9;
            const double* src = padded.data() + i * pp;
            for (int y = 0; y < H; ++y) {
                double* __restrict drow = dst + static_cast<std::size_t>(y) * Wd;
                const double* r0 = src + static_cast<std::size_t>(y) * pw;
                const double* r1 = r0 + pw;
                const double* r2 = r1 + pw;
                for (int x = 0; x < Wd; ++x)
                    drow[x] += k[0] * r0[x] + k[1] * r0[x + 1] + k[2] * r0[x + 2] + k[3] * r1[x] + k[4] * r1[x + 1] +
                               k[5] * r1[x + 2] + k[6] * r2[x] + k[7] * r2[x + 1] + k[8] * r2[x + 2];
            }
        }
    }
    return out;
}

// Accumulates weight/bias gradients; din (if given) must be zero-initialized
// or hold gradients to add to.
void conv3x3_backward(const Tensor& in, const double* W, const Tensor& dout, double* dW, double* db, Tensor* din) {
    const int H = in.h, Wd = in.w, pw = Wd + 2;
    const std::size_t pp = static_cast<std::size_t>(H + 2) * pw;
    const std::vector<double> padded = pad1(in);
    std::vector<double> dpad(din ? pp * in.c : 0, 0.0);
    for (int o = 0; o < dout.c; ++o) {
        const double* g = dout.ch(o);
        db[o] += std::accumulate(g, g + dout.plane(), 0.0);
        for (int i = 0; i < in.c; ++i) {
            const std::size_t wi = (static_cast<std::size_t>(o) * in.c + i) * 9;
            const double* k = W + wi;
            const double* src = padded.data() + i * pp;
            double acc[9] = {};
            for (int y = 0; y < H; ++y) {
                const double* grow = g + static_cast<std::size_t>(y) * Wd;
                const double* r[3] = {src + static_cast<std::size_t>(y) * pw, src + static_cast<std::size_t>(y + 1) * pw,
                                      src + static_cast<std::size_t>(y + 2) * pw};
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const double* rr = r[ky] + kx;
                        double a = 0.0;
                        for (int x = 0; x < Wd; ++x) a += grow[x] * rr[x];
                        acc[ky * 3 + kx] += a;
                    }
                if (din) {
                    double* dbase = dpad.data() + i * pp + static_cast<std::size_t>(y) * pw;
                    for (int ky = 0; ky < 3; ++ky) {
                        double* __restrict drow = dbase + static_cast<std::size_t>(ky) * pw;
                        const double k0 = k[ky * 3], k1 = k[ky * 3 + 1], k2 = k[ky * 3 + 2];
                        for (int x = 0; x < Wd; ++x) {
                            drow[x] += k0 * grow[x];
                            drow[x + 1] += k1 * grow[x];
                            drow[x + 2] += k2 * grow[x];
                        }
                    }
                }
            }
            for (int t = 0; t < 9; ++t) dW[wi + t] += acc[t];
        }
    }
    if (din)
        for (int i = 0; i < in.c; ++i)
            for (int y = 0; y < H; ++y) {
                double* drow = din->ch(i) + static_cast<std::size_t>(y) * Wd;
                const double* srow = dpad.data() + i * pp + static_cast<std::size_t>(y + 1) * pw + 1;
                for (int x = 0; x < Wd; ++x) drow[x] += srow[x];
            }
}

Tensor avgpool2(const Tensor& in) {
    Tensor out(in.c, in.h / 2, in.w / 2);
    for (int c = 0; c < in.c; ++c) {
        const double* s = in.ch(c);
        double* d = out.ch(c);
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) {
                const double* r0 = s + static_cast<std::size_t>(2 * y) * in.w + 2 * x;
                const double* r1 = r0 + in.w;
                d[static_cast<std::size_t>(y) * out.w + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
            }
    }
    return out;
}

void avgpool2_backward(const Tensor& dout, Tensor& din) {
    for (int c = 0; c < dout.c; ++c) {
        const double* g = dout.ch(c);
        double* d = din.ch(c);
        for (int y = 0; y < dout.h; ++y)
            for (int x = 0; x < dout.w; ++x) {
                const double v = 0.25 * g[static_cast<std::size_t>(y) * dout.w + x];
                double* r0 = d + static_cast<std::size_t>(2 * y) * din.w + 2 * x;
                double* r1 = r0 + din.w;
                r0[0] += v;
                r0[1] += v;
                r1[0] += v;
                r1[1] += v;
            }
    }
}

// Two-tap bilinear weights for x2 upsampling with half-pixel centers and
// edge clamping (mirror-symmetric).
struct Taps {
    int i0, i1;
    double w0, w1;
};

Taps up_taps(int o, int n) {
    const int k = o / 2;
    if (o % 2 == 0) return {std::max(k - 1, 0), k, 0.25, 0.75};
    return {k, std::min(k + 1, n - 1), 0.75, 0.25};
}

Tensor upsample2(const Tensor& in) {
    Tensor out(in.c, in.h * 2, in.w * 2);
    std::vector<double> row(static_cast<std::size_t>(out.w));
    for (int c = 0; c < in.c; ++c) {
        const double* s = in.ch(c);
        double* d = out.ch(c);
        for (int oy = 0; oy < out.h; ++oy) {
            const Taps ty = up_taps(oy, in.h);
            const double* a = s + static_cast<std::size_t>(ty.i0) * in.w;
            const double* b = s + static_cast<std::size_t>(ty.i1) * in.w;
            for (int ox = 0; ox < out.w; ++ox) {
                const Taps tx = up_taps(ox, in.w);
                d[static_cast<std::size_t>(oy) * out.w + ox] =
                    ty.w0 * (tx.w0 * a[tx.i0] + tx.w1 * a[tx.i1]) + ty.w1 * (tx.w0 * b[tx.i0] + tx.w1 * b[tx.i1]);
            }
        }
    }
    return out;
}

void upsample2_backward(const Tensor& dout, Tensor& din) {
    for (int c = 0; c < din.c; ++c) {
        const double* g = dout.ch(c);
        double* d = din.ch(c);
        for (int oy = 0; oy < dout.h; ++oy) {
            const Taps ty = up_taps(oy, din.h);
            double* a = d + static_cast<std::size_t>(ty.i0) * din.w;
            double* b = d + static_cast<std::size_t>(ty.i1) * din.w;
            for (int ox = 0; ox < dout.w; ++ox) {
                const Taps tx = up_taps(ox, din.w);
                const double v = g[static_cast<std::size_t>(oy) * dout.w + ox];
                a[tx.i0] += ty.w0 * tx.w0 * v;
                a[tx.i1] += ty.w0 * tx.w1 * v;
                b[tx.i0] += ty.w1 * tx.w0 * v;
                b[tx.i1] += ty.w1 * tx.w1 * v;
            }
        }
    }
}

Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor out(a.c + b.c, a.h, a.w);
    std::copy(a.d.begin(), a.d.end(), out.d.begin());
    std::copy(b.d.begin(), b.d.end(), out.d.begin() + static_cast<std::ptrdiff_t>(a.d.size()));
    return out;
}

// Split a concat gradient, adding into the two parts.
void split_add(const Tensor& g, Tensor& a, Tensor& b) {
    for (std::size_t i = 0; i < a.d.size(); ++i) a.d[i] += g.d[i];
    for (std::size_t i = 0; i < b.d.size(); ++i) b.d[i] += g.d[a.d.size() + i];
}

void tanh_inplace(Tensor& t) {
    for (double& v : t.d) v = std::tanh(v);
}

// dz = dy * (1 - y^2) for y = tanh(z)
void tanh_backward(const Tensor& y, Tensor& dy) {
    for (std::size_t i = 0; i < dy.d.size(); ++i) dy.d[i] *= 1.0 - y.d[i] * y.d[i];
}

struct Views {
    const double *e1w, *e1b, *e2w, *e2b;
    const double *gzw = nullptr, *gzb = nullptr, *gcw = nullptr, *gcb = nullptr;
    const double *d1w, *d1b, *d2w, *d2b;
    const double *hcw, *hcb, *f1w, *f1b, *f2w, *f2b;
};

template <class P, class V>
V make_views(P& params) {
    auto at = [&](const char* name) { return params.view(params.slot(name)).data(); };
    V v{};
    v.e1w = at("enc1.weight");
    v.e1b = at("enc1.bias");
    v.e2w = at("enc2.weight");
    v.e2b = at("enc2.bias");
    bool has_gru = false;
    for (const auto& s : params.layout) has_gru = has_gru || s.name == "gru.update.weight";
    if (has_gru) {
        v.gzw = at("gru.update.weight");
        v.gzb = at("gru.update.bias");
        v.gcw = at("gru.candidate.weight");
        v.gcb = at("gru.candidate.bias");
    }
    v.d1w = at("dec1.weight");
    v.d1b = at("dec1.bias");
    v.d2w = at("dec2.weight");
    v.d2b = at("dec2.bias");
    v.hcw = at("head.conv.weight");
    v.hcb = at("head.conv.bias");
    v.f1w = at("head.fc1.weight");
    v.f1b = at("head.fc1.bias");
    v.f2w = at("head.fc2.weight");
    v.f2b = at("head.fc2.bias");
    return v;
}

struct GradViews {
    double *e1w, *e1b, *e2w, *e2b;
    double *gzw = nullptr, *gzb = nullptr, *gcw = nullptr, *gcb = nullptr;
    double *d1w, *d1b, *d2w, *d2b;
    double *hcw, *hcb, *f1w, *f1b, *f2w, *f2b;
};

struct HeadCache {
    Tensor input;  // scaled depth
    Tensor act;    // tanh(conv)
    std::vector<double> pooled;
    std::vector<double> hidden;
    double v = 0.0;
};

Tensor depth_tensor(std::span<const double> depth, int S) {
    Tensor t(1, S, S);
    std::copy(depth.begin(), depth.end(), t.d.begin());
    return t;
}

}  // namespace

struct DepthVelocityNet::Cache {
    Tensor x0, c1, e1, c2, e2;
    std::vector<double> h_prev;
    Tensor xh, gate, cand;
    Tensor h;
    Tensor u1, d1in, d1, u2, d2in, zd2;
    std::vector<double> depth;
    HeadCache head;
};

namespace {

void head_forward(const NetConfig& cfg, const Views& v, std::span<const double> depth, HeadCache& hc) {
    const int S = cfg.input_size;
    hc.input = depth_tensor(depth, S);
    for (double& x : hc.input.d) x *= cfg.head_input_scale;
    hc.act = conv3x3(hc.input, v.hcw, v.hcb, cfg.head_channels);
    tanh_inplace(hc.act);

    const int G = cfg.head_grid;
    const int blk = S / G;
    const double inv = 1.0 / (blk * blk);
    hc.pooled.assign(static_cast<std::size_t>(cfg.head_channels) * G * G, 0.0);
    for (int c = 0; c < cfg.head_channels; ++c) {
        const double* a = hc.act.ch(c);
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x)
                hc.pooled[(static_cast<std::size_t>(c) * G + y / blk) * G + x / blk] +=
                    a[static_cast<std::size_t>(y) * S + x];
    }
    for (double& p : hc.pooled) p *= inv;

    const std::size_t n_in = hc.pooled.size();
    hc.hidden.assign(static_cast<std::size_t>(cfg.head_hidden), 0.0);
    for (int j = 0; j < cfg.head_hidden; ++j) {
        double z = v.f1b[j];
        const double* row = v.f1w + static_cast<std::size_t>(j) * n_in;
        for (std::size_t k = 0; k < n_in; ++k) z += row[k] * hc.pooled[k];
        hc.hidden[static_cast<std::size_t>(j)] = std::tanh(z);
    }
    double z = v.f2b[0];
    for (int j = 0; j < cfg.head_hidden; ++j) z += v.f2w[j] * hc.hidden[static_cast<std::size_t>(j)];
    hc.v = std::tanh(z);
}

// Returns d(objective)/d(depth input) when want_input is set.
void head_backward(const NetConfig& cfg, const Views& v, const GradViews& g, const HeadCache& hc, double dv,
                   std::vector<double>* d_depth) {
    const int S = cfg.input_size;
    const int G = cfg.head_grid;
    const int blk = S / G;
    const std::size_t n_in = hc.pooled.size();

    const double dz2 = dv * (1.0 - hc.v * hc.v);
    g.f2b[0] += dz2;
    std::vector<double> dz1(static_cast<std::size_t>(cfg.head_hidden));
    for (int j = 0; j < cfg.head_hidden; ++j) {
        const double hj = hc.hidden[static_cast<std::size_t>(j)];
        g.f2w[j] += dz2 * hj;
        dz1[static_cast<std::size_t>(j)] = dz2 * v.f2w[j] * (1.0 - hj * hj);
    }
    std::vector<double> dp(n_in, 0.0);
    for (int j = 0; j < cfg.head_hidden; ++j) {
        const double d = dz1[static_cast<std::size_t>(j)];
        g.f1b[j] += d;
        const double* row = v.f1w + static_cast<std::size_t>(j) * n_in;
        double* grow = g.f1w + static_cast<std::size_t>(j) * n_in;
        for (std::size_t k = 0; k < n_in; ++k) {
            grow[k] += d * hc.pooled[k];
            dp[k] += d * row[k];
        }
    }
    Tensor dact(cfg.head_channels, S, S);
    const double inv = 1.0 / (blk * blk);
    for (int c = 0; c < cfg.head_channels; ++c) {
        double* da = dact.ch(c);
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x)
                da[static_cast<std::size_t>(y) * S + x] =
                    inv * dp[(static_cast<std::size_t>(c) * G + y / blk) * G + x / blk];
    }
    tanh_backward(hc.act, dact);
    if (d_depth) {
        Tensor din(1, S, S);
        conv3x3_backward(hc.input, v.hcw, dact, g.hcw, g.hcb, &din);
        d_depth->resize(din.d.size());
        for (std::size_t i = 0; i < din.d.size(); ++i) (*d_depth)[i] = cfg.head_input_scale * din.d[i];
    } else {
        conv3x3_backward(hc.input, v.hcw, dact, g.hcw, g.hcb, nullptr);
    }
}

std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

}  // namespace

void NetConfig::validate() const {
    if (input_size < 8 || input_size % 4 != 0) throw ValidationError("net: input_size must be a multiple of 4, >= 8");
    if (enc1_channels <= 0 || enc2_channels <= 0 || dec1_channels <= 0 || head_channels <= 0 || head_hidden <= 0)
        throw ValidationError("net: channel counts must be positive");
    if (head_grid <= 0 || input_size % head_grid != 0) throw ValidationError("net: head_grid must divide input_size");
    if (!(depth_floor > 0.0) || !(head_input_scale > 0.0) || !(initial_depth > depth_floor))
        throw ValidationError("net: invalid depth scaling");
}

std::size_t TensorSlot::size() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::span<double> ModelParams::view(const TensorSlot& s) {
    auto& v = s.part == ParamPart::theta ? theta : phi;
    return {v.data() + s.offset, s.size()};
}

std::span<const double> ModelParams::view(const TensorSlot& s) const {
    const auto& v = s.part == ParamPart::theta ? theta : phi;
    return {v.data() + s.offset, s.size()};
}

const TensorSlot& ModelParams::slot(const std::string& name) const {
    for (const auto& s : layout)
        if (s.name == name) return s;
    throw ValidationError("model params: no tensor named " + name);
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z;
    z.theta.assign(theta.size(), 0.0);
    z.phi.assign(phi.size(), 0.0);
    z.layout = layout;
    return z;
}

void ModelParams::validate() const {
    std::size_t next_theta = 0, next_phi = 0;
    for (const auto& s : layout) {
        std::size_t& next = s.part == ParamPart::theta ? next_theta : next_phi;
        if (s.offset != next) throw ValidationError("model params: layout gap or overlap at " + s.name);
        next += s.size();
    }
    if (next_theta != theta.size() || next_phi != phi.size())
        throw ValidationError("model params: layout does not cover the parameter arrays");
    for (double v : theta)
        if (!std::isfinite(v)) throw ValidationError("model params: non-finite theta");
    for (double v : phi)
        if (!std::isfinite(v)) throw ValidationError("model params: non-finite phi");
}

const char* to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::joint: return "joint";
        case TrainMode::independent: return "independent";
        case TrainMode::no_depth: return "no_depth";
    }
    return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "joint") return TrainMode::joint;
    if (s == "independent") return TrainMode::independent;
    if (s == "no_depth" || s == "no-depth") return TrainMode::no_depth;
    throw ValidationError("unknown training mode: " + s);
}

double loss_perception(std::span<const double> depth_pred, std::span<const double> depth_gt) {
    if (depth_pred.size() != depth_gt.size() || depth_gt.empty()) throw ShapeError("loss_perception: shape mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < depth_gt.size(); ++i) {
        const double gt = depth_gt[i];
        if (!(gt > 0.0)) throw ValidationError("loss_perception: ground-truth depth must be positive");
        const double e = gt - depth_pred[i];
        sum += e * e / gt;
    }
    return sum / static_cast<double>(depth_gt.size());
}

double loss_velocity(double v_y_pred, double v_y_label) {
    const double e = v_y_pred - v_y_label;
    return e * e;
}

DepthVelocityNet::DepthVelocityNet(NetConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    auto add = [&](std::string name, ParamPart part, std::vector<std::uint32_t> shape) {
        std::size_t& next = part == ParamPart::theta ? theta_size_ : phi_size_;
        TensorSlot s{std::move(name), part, next, std::move(shape)};
        next += s.size();
        layout_.push_back(std::move(s));
    };
    const int c1 = cfg_.enc1_channels, c2 = cfg_.enc2_channels, c3 = cfg_.dec1_channels;
    add("enc1.weight", ParamPart::theta, {u32(c1), 1, 3, 3});
    add("enc1.bias", ParamPart::theta, {u32(c1)});
    add("enc2.weight", ParamPart::theta, {u32(c2), u32(c1), 3, 3});
    add("enc2.bias", ParamPart::theta, {u32(c2)});
    if (cfg_.recurrent) {
        add("gru.update.weight", ParamPart::theta, {u32(c2), u32(2 * c2), 3, 3});
        add("gru.update.bias", ParamPart::theta, {u32(c2)});
        add("gru.candidate.weight", ParamPart::theta, {u32(c2), u32(2 * c2), 3, 3});
        add("gru.candidate.bias", ParamPart::theta, {u32(c2)});
    }
    add("dec1.weight", ParamPart::theta, {u32(c3), u32(2 * c2), 3, 3});
    add("dec1.bias", ParamPart::theta, {u32(c3)});
    add("dec2.weight", ParamPart::theta, {1, u32(c3 + c1), 3, 3});
    add("dec2.bias", ParamPart::theta, {1});
    const int n_pool = cfg_.head_channels * cfg_.head_grid * cfg_.head_grid;
    add("head.conv.weight", ParamPart::phi, {u32(cfg_.head_channels), 1, 3, 3});
    add("head.conv.bias", ParamPart::phi, {u32(cfg_.head_channels)});
    add("head.fc1.weight", ParamPart::phi, {u32(cfg_.head_hidden), u32(n_pool)});
    add("head.fc1.bias", ParamPart::phi, {u32(cfg_.head_hidden)});
    add("head.fc2.weight", ParamPart::phi, {1, u32(cfg_.head_hidden)});
    add("head.fc2.bias", ParamPart::phi, {1});
}

ModelParams DepthVelocityNet::init_params(std::uint64_t seed) const {
    ModelParams p;
    p.theta.assign(theta_size_, 0.0);
    p.phi.assign(phi_size_, 0.0);
    p.layout = layout_;
    Rng rng(seed);
    for (const auto& s : layout_) {
        auto v = p.view(s);
        if (s.shape.size() == 1) {
            if (s.name == "dec2.bias") {
                // softplus^-1(initial_depth - floor)
                const double y = cfg_.initial_depth - cfg_.depth_floor;
                v[0] = y + std::log(-std::expm1(-y));
            }
            continue;
        }
        double fan_in = s.shape[1], fan_out = s.shape[0];
        if (s.shape.size() == 4) {
            fan_in *= 9.0;
            fan_out *= 9.0;
        }
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& x : v) x = rng.uniform(-limit, limit);
    }
    return p;
}

void DepthVelocityNet::check_params(const ModelParams& params) const {
    if (params.layout != layout_ || params.theta.size() != theta_size_ || params.phi.size() != phi_size_)
        throw ShapeError("parameters do not match the network layout");
}

void DepthVelocityNet::forward_frame(const ModelParams& params, const Bem& bem, const std::vector<double>& h_prev,
                                     Cache& c, bool depth_branch) const {
    const int S = cfg_.input_size;
    if (bem.width != S || bem.height != S) throw ShapeError("forward: BEM does not match the configured input size");
    const Views v = make_views<const ModelParams, Views>(params);
    const int C2 = cfg_.enc2_channels;

    c.x0 = Tensor(1, S, S);
    for (std::size_t i = 0; i < bem.mask.size(); ++i) c.x0.d[i] = bem.mask[i] ? 1.0 : 0.0;
    c.c1 = conv3x3(c.x0, v.e1w, v.e1b, cfg_.enc1_channels);
    tanh_inplace(c.c1);
    c.e1 = avgpool2(c.c1);
    c.c2 = conv3x3(c.e1, v.e2w, v.e2b, C2);
    tanh_inplace(c.c2);
    c.e2 = avgpool2(c.c2);

    const std::size_t hn = c.e2.d.size();
    c.h_prev = h_prev.empty() ? std::vector<double>(hn, 0.0) : h_prev;
    if (c.h_prev.size() != hn) throw ShapeError("forward: recurrent state has the wrong size");

    if (cfg_.recurrent) {
        Tensor hp(C2, c.e2.h, c.e2.w);
        hp.d = c.h_prev;
        c.xh = concat(c.e2, hp);
        c.gate = conv3x3(c.xh, v.gzw, v.gzb, C2);
        for (double& z : c.gate.d) z = sigmoid(z);
        c.cand = conv3x3(c.xh, v.gcw, v.gcb, C2);
        tanh_inplace(c.cand);
        c.h = Tensor(C2, c.e2.h, c.e2.w);
        for (std::size_t i = 0; i < hn; ++i)
            c.h.d[i] = (1.0 - c.gate.d[i]) * c.h_prev[i] + c.gate.d[i] * c.cand.d[i];
    } else {
        c.h = c.e2;
    }
    if (!depth_branch) return;

    c.u1 = upsample2(c.h);
    c.d1in = concat(c.u1, c.c2);
    c.d1 = conv3x3(c.d1in, v.d1w, v.d1b, cfg_.dec1_channels);
    tanh_inplace(c.d1);
    c.u2 = upsample2(c.d1);
    c.d2in = concat(c.u2, c.c1);
    c.zd2 = conv3x3(c.d2in, v.d2w, v.d2b, 1);
    c.depth.resize(c.zd2.d.size());
    for (std::size_t i = 0; i < c.depth.size(); ++i) c.depth[i] = softplus(c.zd2.d[i]) + cfg_.depth_floor;
}

ForwardResult DepthVelocityNet::forward(const ModelParams& params, const Bem& bem,
                                        const RecurrentState& state) const {
    check_params(params);
    Cache c;
    forward_frame(params, bem, state.h, c, true);
    const Views v = make_views<const ModelParams, Views>(params);
    head_forward(cfg_, v, c.depth, c.head);
    return {std::move(c.depth), c.head.v, RecurrentState{std::move(c.h.d)}};
}

double DepthVelocityNet::velocity(const ModelParams& params, std::span<const double> depth) const {
    check_params(params);
    const auto n = static_cast<std::size_t>(cfg_.input_size) * cfg_.input_size;
    if (depth.size() != n) throw ShapeError("velocity: depth map does not match the configured input size");
    HeadCache hc;
    head_forward(cfg_, make_views<const ModelParams, Views>(params), depth, hc);
    return hc.v;
}

RecurrentState DepthVelocityNet::advance_state(const ModelParams& params, const Bem& bem,
                                               const RecurrentState& state) const {
    check_params(params);
    Cache c;
    forward_frame(params, bem, state.h, c, false);
    return {std::move(c.h.d)};
}

Objective DepthVelocityNet::objective(const ModelParams& params, std::span<const Sample> seq, TrainMode mode,
                                      LossWeights w, const RecurrentState& init) const {
    check_params(params);
    if (seq.empty()) throw ValidationError("objective: empty sequence");
    const Views v = make_views<const ModelParams, Views>(params);
    Objective obj;
    std::vector<double> h = init.h;
    for (const Sample& s : seq) {
        Cache c;
        forward_frame(params, s.bem, h, c, true);
        const double lp = loss_perception(c.depth, s.depth_gt);
        head_forward(cfg_, v, mode == TrainMode::independent ? std::span<const double>(s.depth_gt) : c.depth, c.head);
        const double lv = loss_velocity(c.head.v, s.v_y);
        obj.l_p += lp;
        obj.l_v += lv;
        obj.total += (mode == TrainMode::no_depth ? 0.0 : w.w_p * lp) + w.w_v * lv;
        h = std::move(c.h.d);
    }
    const double inv = 1.0 / static_cast<double>(seq.size());
    obj.total *= inv;
    obj.l_p *= inv;
    obj.l_v *= inv;
    return obj;
}

Objective DepthVelocityNet::backward(const ModelParams& params, std::span<const Sample> seq, TrainMode mode,
                                     LossWeights w, ModelParams& grad, const RecurrentState& init) const {
    check_params(params);
    check_params(grad);
    if (seq.empty()) throw ValidationError("backward: empty sequence");
    const Views v = make_views<const ModelParams, Views>(params);
    GradViews g{};
    {
        auto at = [&](const char* name) { return grad.view(grad.slot(name)).data(); };
        g.e1w = at("enc1.weight");
        g.e1b = at("enc1.bias");
        g.e2w = at("enc2.weight");
        g.e2b = at("enc2.bias");
        if (cfg_.recurrent) {
            g.gzw = at("gru.update.weight");
            g.gzb = at("gru.update.bias");
            g.gcw = at("gru.candidate.weight");
            g.gcb = at("gru.candidate.bias");
        }
        g.d1w = at("dec1.weight");
        g.d1b = at("dec1.bias");
        g.d2w = at("dec2.weight");
        g.d2b = at("dec2.bias");
        g.hcw = at("head.conv.weight");
        g.hcb = at("head.conv.bias");
        g.f1w = at("head.fc1.weight");
        g.f1b = at("head.fc1.bias");
        g.f2w = at("head.fc2.weight");
        g.f2b = at("head.fc2.bias");
    }

    const std::size_t T = seq.size();
    const double inv_t = 1.0 / static_cast<double>(T);
    std::vector<Cache> caches(T);
    Objective obj;
    {
        std::vector<double> h = init.h;
        for (std::size_t t = 0; t < T; ++t) {
            Cache& c = caches[t];
            forward_frame(params, seq[t].bem, h, c, true);
            const double lp = loss_perception(c.depth, seq[t].depth_gt);
            head_forward(cfg_, v,
                         mode == TrainMode::independent ? std::span<const double>(seq[t].depth_gt) : c.depth,
                         c.head);
            const double lv = loss_velocity(c.head.v, seq[t].v_y);
            obj.l_p += lp;
            obj.l_v += lv;
            obj.total += (mode == TrainMode::no_depth ? 0.0 : w.w_p * lp) + w.w_v * lv;
            h = c.h.d;
        }
        obj.total *= inv_t;
        obj.l_p *= inv_t;
        obj.l_v *= inv_t;
    }

    const int S = cfg_.input_size;
    const int C1 = cfg_.enc1_channels, C2 = cfg_.enc2_channels, C3 = cfg_.dec1_channels;
    std::vector<double> dh_carry;  // gradient w.r.t. h_t from frame t+1
    for (std::size_t ti = T; ti-- > 0;) {
        const Cache& c = caches[ti];
        const Sample& s = seq[ti];
        const double npx = static_cast<double>(s.depth_gt.size());

        // d objective / d depth prediction
        std::vector<double> ddepth(c.depth.size(), 0.0);
        if (mode != TrainMode::no_depth) {
            const double k = w.w_p * inv_t * 2.0 / npx;
            for (std::size_t i = 0; i < ddepth.size(); ++i)
                ddepth[i] = k * (c.depth[i] - s.depth_gt[i]) / s.depth_gt[i];
        }
        const double dv = w.w_v * inv_t * 2.0 * (c.head.v - s.v_y);
        if (mode == TrainMode::independent) {
            head_backward(cfg_, v, g, c.head, dv, nullptr);
        } else {
            std::vector<double> dd_head;
            head_backward(cfg_, v, g, c.head, dv, &dd_head);
            for (std::size_t i = 0; i < ddepth.size(); ++i) ddepth[i] += dd_head[i];
        }

        // Decoder.
        Tensor dzd2(1, S, S);
        for (std::size_t i = 0; i < ddepth.size(); ++i) dzd2.d[i] = ddepth[i] * sigmoid(c.zd2.d[i]);
        Tensor dd2in(C3 + C1, S, S);
        conv3x3_backward(c.d2in, v.d2w, dzd2, g.d2w, g.d2b, &dd2in);
        Tensor du2(C3, S, S), dc1(C1, S, S);
        split_add(dd2in, du2, dc1);
        Tensor dd1(C3, S / 2, S / 2);
        upsample2_backward(du2, dd1);
        tanh_backward(c.d1, dd1);
        Tensor dd1in(2 * C2, S / 2, S / 2);
        conv3x3_backward(c.d1in, v.d1w, dd1, g.d1w, g.d1b, &dd1in);
        Tensor du1(C2, S / 2, S / 2), dc2(C2, S / 2, S / 2);
        split_add(dd1in, du1, dc2);
        Tensor dh(C2, S / 4, S / 4);
        upsample2_backward(du1, dh);
        if (!dh_carry.empty())
            for (std::size_t i = 0; i < dh.d.size(); ++i) dh.d[i] += dh_carry[i];

        // Recurrent cell.
        Tensor de2(C2, S / 4, S / 4);
        if (cfg_.recurrent) {
            Tensor dgate(C2, S / 4, S / 4), dcand(C2, S / 4, S / 4);
            std::vector<double> dh_prev(dh.d.size());
            for (std::size_t i = 0; i < dh.d.size(); ++i) {
                const double gt = c.gate.d[i], cd = c.cand.d[i];
                dgate.d[i] = dh.d[i] * (cd - c.h_prev[i]) * gt * (1.0 - gt);
                dcand.d[i] = dh.d[i] * gt * (1.0 - cd * cd);
                dh_prev[i] = dh.d[i] * (1.0 - gt);
            }
            Tensor dxh(2 * C2, S / 4, S / 4);
            conv3x3_backward(c.xh, v.gzw, dgate, g.gzw, g.gzb, &dxh);
            conv3x3_backward(c.xh, v.gcw, dcand, g.gcw, g.gcb, &dxh);
            Tensor dhp(C2, S / 4, S / 4);
            split_add(dxh, de2, dhp);
            for (std::size_t i = 0; i < dh_prev.size(); ++i) dh_prev[i] += dhp.d[i];
            dh_carry = std::move(dh_prev);
        } else {
            de2 = dh;
        }

        // Encoder.
        avgpool2_backward(de2, dc2);
        tanh_backward(c.c2, dc2);
        Tensor de1(C1, S / 2, S / 2);
        conv3x3_backward(c.e1, v.e2w, dc2, g.e2w, g.e2b, &de1);
        avgpool2_backward(de1, dc1);
        tanh_backward(c.c1, dc1);
        conv3x3_backward(c.x0, v.e1w, dc1, g.e1w, g.e1b, nullptr);
    }
    return obj;
}

}  // namespace evavoid
