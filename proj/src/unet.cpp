#include "lesionseg/unet.hpp"

#include <cmath>
#include <ostream>

namespace lesionseg {

void NetConfig::validate() const {
    if (in_channels < 1)
        throw config_error("NetConfig: in_channels must be positive");
    if (levels() < 2)
        throw config_error("NetConfig: need at least 2 levels");
    for (std::size_t i = 1; i < channels.size(); ++i)
        if (channels[i] <= channels[i - 1])
            throw config_error("NetConfig: channels must be strictly increasing");
    for (int c : channels)
        if (c < 1)
            throw config_error("NetConfig: channels must be positive");
    if (eps <= 0.0)
        throw config_error("NetConfig: eps must be positive");
    if (momentum <= 0.0 || momentum >= 1.0)
        throw config_error("NetConfig: momentum must be in (0,1)");
}

Tensor4 UNet::ConvBlock::forward(const Tensor4& x, const ForwardCtx& ctx) {
    Tensor4 t = conv.forward(x);
    if (norm_first) {
        t = norm.forward(t, ctx);
        return relu.forward(t);
    }
    t = relu.forward(t);
    return norm.forward(t, ctx);
}

Tensor4 UNet::ConvBlock::backward(const Tensor4& dy) {
    Tensor4 d = dy;
    if (norm_first) {
        d = relu.backward(d);
        d = norm.backward(d);
    } else {
        d = norm.backward(d);
        d = relu.backward(d);
    }
    return conv.backward(d);
}

UNet::UNet(NetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto& ch = cfg_.channels;
    const int L = cfg_.levels();

    auto block = [&](int cin, int cout, const std::string& name) {
        ConvBlock b;
        b.conv = Conv2D(cin, cout, 3, name + ".conv");
        b.norm = NormLayer(cfg_.norm, cout, cfg_.eps, cfg_.momentum, name + ".norm");
        b.norm_first = cfg_.norm_before_act;
        return b;
    };

    int cin = cfg_.in_channels;
    for (int i = 0; i + 1 < L; ++i) {
        EncLevel lvl;
        lvl.a = block(cin, ch[i], "enc" + std::to_string(i) + ".a");
        lvl.b = block(ch[i], ch[i], "enc" + std::to_string(i) + ".b");
        enc_.push_back(std::move(lvl));
        cin = ch[i];
    }
    bottom_a_ = block(ch[L - 2], ch[L - 1], "bottom.a");
    bottom_b_ = block(ch[L - 1], ch[L - 1], "bottom.b");

    dec_.resize(L - 1);
    for (int i = L - 2; i >= 0; --i) {
        const int deeper = (i == L - 2) ? ch[L - 1] : ch[i + 1];
        DecLevel& d = dec_[i];
        d.upconv = block(deeper, ch[i], "dec" + std::to_string(i) + ".up");
        d.a = block(2 * ch[i], ch[i], "dec" + std::to_string(i) + ".a");
        d.b = block(ch[i], ch[i], "dec" + std::to_string(i) + ".b");
    }
    head_ = Conv2D(ch[0], 1, 1, "head");
    skips_.resize(L - 1);
    dskips_.resize(L - 1);
}

void UNet::init_weights(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& lvl : enc_) {
        lvl.a.conv.init_he(rng);
        lvl.b.conv.init_he(rng);
    }
    bottom_a_.conv.init_he(rng);
    bottom_b_.conv.init_he(rng);
    for (auto& d : dec_) {
        d.upconv.conv.init_he(rng);
        d.a.conv.init_he(rng);
        d.b.conv.init_he(rng);
    }
    head_.init_he(rng);
}

Tensor4 UNet::forward(const Tensor4& x, const ForwardCtx& ctx) {
    if (x.c != cfg_.in_channels)
        throw config_error("UNet: input channel mismatch");

    Tensor4 cur = x;
    for (std::size_t i = 0; i < enc_.size(); ++i) {
        cur = enc_[i].a.forward(cur, ctx);
        cur = enc_[i].b.forward(cur, ctx);
        skips_[i] = cur;
        cur = enc_[i].pool.forward(cur);
    }
    cur = bottom_a_.forward(cur, ctx);
    cur = bottom_b_.forward(cur, ctx);

    for (int i = int(dec_.size()) - 1; i >= 0; --i) {
        DecLevel& d = dec_[i];
        d.up.set_target(skips_[i].h, skips_[i].w);
        cur = d.up.forward(cur);
        cur = d.upconv.forward(cur, ctx);
        cur = concat_channels(skips_[i], cur);
        cur = d.a.forward(cur, ctx);
        cur = d.b.forward(cur, ctx);
    }
    cur = head_.forward(cur);
    return out_.forward(cur);
}

Tensor4 UNet::backward(const Tensor4& dy) {
    Tensor4 d = out_.backward(dy);
    d = head_.backward(d);

    for (std::size_t i = 0; i < dec_.size(); ++i) {
        DecLevel& lvl = dec_[i];
        d = lvl.b.backward(d);
        d = lvl.a.backward(d);
        Tensor4 dskip, dup;
        split_channels(d, cfg_.channels[i], dskip, dup);
        dskips_[i] = std::move(dskip);
        d = lvl.upconv.backward(dup);
        d = lvl.up.backward(d);
    }

    d = bottom_b_.backward(d);
    d = bottom_a_.backward(d);

    for (int i = int(enc_.size()) - 1; i >= 0; --i) {
        d = enc_[i].pool.backward(d);
        for (std::size_t k = 0; k < d.v.size(); ++k)
            d.v[k] += dskips_[i].v[k];
        d = enc_[i].b.backward(d);
        d = enc_[i].a.backward(d);
    }
    return d;
}

std::vector<ParamView> UNet::params() {
    std::vector<ParamView> out;
    for (auto& lvl : enc_) {
        lvl.a.conv.collect(out);
        lvl.a.norm.collect(out);
        lvl.b.conv.collect(out);
        lvl.b.norm.collect(out);
    }
    bottom_a_.conv.collect(out);
    bottom_a_.norm.collect(out);
    bottom_b_.conv.collect(out);
    bottom_b_.norm.collect(out);
    for (auto& d : dec_) {
        d.upconv.conv.collect(out);
        d.upconv.norm.collect(out);
        d.a.conv.collect(out);
        d.a.norm.collect(out);
        d.b.conv.collect(out);
        d.b.norm.collect(out);
    }
    head_.collect(out);
    return out;
}

void UNet::zero_grads() {
    for (auto& p : params())
        std::fill(p.g->begin(), p.g->end(), 0.0);
}

std::size_t UNet::param_count() {
    std::size_t n = 0;
    for (auto& p : params())
        n += p.w->size();
    return n;
}

std::vector<NormLayer*> UNet::norm_layers() {
    std::vector<NormLayer*> out;
    for (auto& lvl : enc_) {
        out.push_back(&lvl.a.norm);
        out.push_back(&lvl.b.norm);
    }
    out.push_back(&bottom_a_.norm);
    out.push_back(&bottom_b_.norm);
    for (auto& d : dec_) {
        out.push_back(&d.upconv.norm);
        out.push_back(&d.a.norm);
        out.push_back(&d.b.norm);
    }
    return out;
}

NormLayer& UNet::shallow_norm() { return enc_.front().a.norm; }
NormLayer& UNet::deep_norm() { return bottom_b_.norm; }

Tensor4 slab_to_tensor(const Slab25D& slab) {
    const int C = 3 * kNumContrasts;
    Tensor4 x(1, C, slab.h, slab.w);
    for (std::size_t i = 0; i < slab.channels.size(); ++i)
        x.v[i] = double(slab.channels[i]);
    return x;
}

std::vector<double> UNet::forward_slab(const Slab25D& slab, StatsMode stats) {
    Tensor4 x = slab_to_tensor(slab);
    std::vector<int> combos = {slab.availability};
    ForwardCtx ctx{Phase::Infer, stats, &combos};
    Tensor4 y = forward(x, ctx);
    return y.v;
}

BinaryMask3D UNet::predict_volume(const MultiContrastVolume& mcv, Plane plane, StatsMode stats) {
    const int n_slices = plane_extent(mcv.dims(), plane);
    BinaryMask3D mask(mcv.dims(), mcv.spacing());
    for (int s = 0; s < n_slices; ++s) {
        Slab25D slab = extract_slab(mcv, plane, s);
        std::vector<double> prob = forward_slab(slab, stats);
        std::vector<std::uint8_t> slice(prob.size());
        for (std::size_t i = 0; i < prob.size(); ++i)
            slice[i] = prob[i] > 0.5; // lesion iff p > 0.5
        set_slice(mask, plane, s, slice);
    }
    return mask;
}

std::vector<NormStatRecord> export_norm_stats(UNet& net, const std::vector<Slab25D>& inputs,
                                              StatsMode stats) {
    std::vector<NormStatRecord> records;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        (void)net.forward_slab(inputs[k], stats);
        for (NormLayer* layer : {&net.shallow_norm(), &net.deep_norm()}) {
            const Tensor4& xhat = layer->last_xhat();
            const std::size_t plane = std::size_t(xhat.h) * xhat.w;
            for (int j = 0; j < xhat.c; ++j) {
                const double* hp = xhat.plane(0, j);
                double s = 0.0, s2 = 0.0;
                for (std::size_t i = 0; i < plane; ++i) {
                    s += hp[i];
                    s2 += hp[i] * hp[i];
                }
                const double mean = s / double(plane);
                const double var = std::max(0.0, s2 / double(plane) - mean * mean);
                records.push_back(
                    {"input" + std::to_string(k), layer->name(), j, mean, var});
            }
        }
    }
    return records;
}

void write_norm_stats_csv(const std::vector<NormStatRecord>& records, std::ostream& os) {
    os << "input_id,layer_id,channel,mean,var\n";
    os.precision(12);
    for (const auto& r : records)
        os << r.input_id << ',' << r.layer_id << ',' << r.channel << ',' << r.mean << ','
           << r.var << '\n';
}

} // namespace lesionseg
