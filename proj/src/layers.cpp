#include "lesionseg/layers.hpp"

#include <algorithm>
#include <cmath>

namespace lesionseg {

std::string norm_mode_name(NormMode m) {
    switch (m) {
    case NormMode::BN: return "bn";
    case NormMode::IN: return "in";
    case NormMode::CondIN: return "condin";
    }
    return "?";
}

NormMode parse_norm_mode(const std::string& s) {
    if (s == "bn")
        return NormMode::BN;
    if (s == "in")
        return NormMode::IN;
    if (s == "condin")
        return NormMode::CondIN;
    throw config_error("unknown norm mode: " + s);
}

// ---------------------------------------------------------------- Conv2D

Conv2D::Conv2D(int cin, int cout, int k, std::string name)
    : cin_(cin), cout_(cout), k_(k), pad_(k / 2), name_(std::move(name)) {
    w.assign(std::size_t(cout) * cin * k * k, 0.0);
    b.assign(cout, 0.0);
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
}

void Conv2D::init_he(std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (double(cin_) * k_ * k_)));
    for (double& x : w)
        x = dist(rng);
    std::fill(b.begin(), b.end(), 0.0);
}

Tensor4 Conv2D::forward(const Tensor4& x) {
    if (x.c != cin_)
        throw config_error("Conv2D " + name_ + ": channel mismatch");
    x_ = x;
    const int H = x.h, W = x.w;
    Tensor4 y(x.n, cout_, H, W);

    for (int n = 0; n < x.n; ++n) {
        for (int co = 0; co < cout_; ++co) {
            double* yp = y.plane(n, co);
            const double bias = b[co];
            for (int i = 0; i < H * W; ++i)
                yp[i] = bias;
            for (int ci = 0; ci < cin_; ++ci) {
                const double* xp = x.plane(n, ci);
                const double* wk = &w[(std::size_t(co) * cin_ + ci) * k_ * k_];
                for (int ky = 0; ky < k_; ++ky) {
                    const int dy_ = ky - pad_;
                    const int i0 = std::max(0, -dy_), i1 = std::min(H, H - dy_);
                    for (int kx = 0; kx < k_; ++kx) {
                        const int dx_ = kx - pad_;
                        const int j0 = std::max(0, -dx_), j1 = std::min(W, W - dx_);
                        const double wv = wk[ky * k_ + kx];
                        if (wv == 0.0)
                            continue;
                        for (int i = i0; i < i1; ++i) {
                            double* yrow = yp + std::size_t(i) * W;
                            const double* xrow = xp + std::size_t(i + dy_) * W + dx_;
                            for (int j = j0; j < j1; ++j)
                                yrow[j] += wv * xrow[j];
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor4 Conv2D::backward(const Tensor4& dy) {
    const int H = x_.h, W = x_.w;
    Tensor4 dx(x_.n, cin_, H, W);

    for (int n = 0; n < x_.n; ++n) {
        for (int co = 0; co < cout_; ++co) {
            const double* gp = dy.plane(n, co);
            double s = 0.0;
            for (int i = 0; i < H * W; ++i)
                s += gp[i];
            gb[co] += s;
            for (int ci = 0; ci < cin_; ++ci) {
                const double* xp = x_.plane(n, ci);
                double* dxp = dx.plane(n, ci);
                const double* wk = &w[(std::size_t(co) * cin_ + ci) * k_ * k_];
                double* gwk = &gw[(std::size_t(co) * cin_ + ci) * k_ * k_];
                for (int ky = 0; ky < k_; ++ky) {
                    const int dy_ = ky - pad_;
                    const int i0 = std::max(0, -dy_), i1 = std::min(H, H - dy_);
                    for (int kx = 0; kx < k_; ++kx) {
                        const int dx_ = kx - pad_;
                        const int j0 = std::max(0, -dx_), j1 = std::min(W, W - dx_);
                        const double wv = wk[ky * k_ + kx];
                        double acc = 0.0;
                        for (int i = i0; i < i1; ++i) {
                            const double* grow = gp + std::size_t(i) * W;
                            const double* xrow = xp + std::size_t(i + dy_) * W + dx_;
                            double* dxrow = dxp + std::size_t(i + dy_) * W + dx_;
                            for (int j = j0; j < j1; ++j) {
                                acc += grow[j] * xrow[j];
                                dxrow[j] += wv * grow[j];
                            }
                        }
                        gwk[ky * k_ + kx] += acc;
                    }
                }
            }
        }
    }
    return dx;
}

void Conv2D::collect(std::vector<ParamView>& out) {
    out.push_back({name_ + ".w", &w, &gw});
    out.push_back({name_ + ".b", &b, &gb});
}

// ---------------------------------------------------------------- ReLU

Tensor4 ReLU::forward(const Tensor4& x) {
    Tensor4 y = x;
    mask_.assign(x.size(), 0);
    for (std::size_t i = 0; i < y.v.size(); ++i) {
        if (y.v[i] > 0.0)
            mask_[i] = 1;
        else
            y.v[i] = 0.0;
    }
    return y;
}

Tensor4 ReLU::backward(const Tensor4& dy) {
    Tensor4 dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i)
        if (!mask_[i])
            dx.v[i] = 0.0;
    return dx;
}

// ---------------------------------------------------------------- Sigmoid

Tensor4 Sigmoid::forward(const Tensor4& x) {
    Tensor4 y = x;
    for (double& v : y.v)
        v = 1.0 / (1.0 + std::exp(-v));
    y_ = y;
    return y;
}

Tensor4 Sigmoid::backward(const Tensor4& dy) {
    Tensor4 dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i)
        dx.v[i] *= y_.v[i] * (1.0 - y_.v[i]);
    return dx;
}

// ---------------------------------------------------------------- MaxPool2

Tensor4 MaxPool2::forward(const Tensor4& x) {
    in_h_ = x.h;
    in_w_ = x.w;
    const int H2 = x.h / 2, W2 = x.w / 2;
    if (H2 < 1 || W2 < 1)
        throw config_error("MaxPool2: input too small");
    Tensor4 y(x.n, x.c, H2, W2);
    argmax_.assign(y.size(), 0);

    std::size_t o = 0;
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* xp = x.plane(n, c);
            for (int i = 0; i < H2; ++i)
                for (int j = 0; j < W2; ++j, ++o) {
                    int base = 2 * i * x.w + 2 * j;
                    int cand[4] = {base, base + 1, base + x.w, base + x.w + 1};
                    int best = cand[0];
                    for (int t = 1; t < 4; ++t)
                        if (xp[cand[t]] > xp[best])
                            best = cand[t];
                    y.v[o] = xp[best];
                    argmax_[o] = best;
                }
        }
    return y;
}

Tensor4 MaxPool2::backward(const Tensor4& dy) {
    Tensor4 dx(dy.n, dy.c, in_h_, in_w_);
    std::size_t o = 0;
    for (int n = 0; n < dy.n; ++n)
        for (int c = 0; c < dy.c; ++c) {
            double* dxp = dx.plane(n, c);
            for (int i = 0; i < dy.h * dy.w; ++i, ++o)
                dxp[argmax_[o]] += dy.v[o];
        }
    return dx;
}

// ------------------------------------------------------- NearestUpsample

Tensor4 NearestUpsample::forward(const Tensor4& x) {
    if (target_h_ < 1 || target_w_ < 1)
        throw config_error("NearestUpsample: target size not set");
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor4 y(x.n, x.c, target_h_, target_w_);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* xp = x.plane(n, c);
            double* yp = y.plane(n, c);
            for (int i = 0; i < target_h_; ++i) {
                const int si = int(std::size_t(i) * in_h_ / target_h_);
                for (int j = 0; j < target_w_; ++j)
                    yp[std::size_t(i) * target_w_ + j] =
                        xp[std::size_t(si) * in_w_ + std::size_t(j) * in_w_ / target_w_];
            }
        }
    return y;
}

Tensor4 NearestUpsample::backward(const Tensor4& dy) {
    Tensor4 dx(dy.n, dy.c, in_h_, in_w_);
    for (int n = 0; n < dy.n; ++n)
        for (int c = 0; c < dy.c; ++c) {
            const double* gp = dy.plane(n, c);
            double* dxp = dx.plane(n, c);
            for (int i = 0; i < dy.h; ++i) {
                const int si = int(std::size_t(i) * in_h_ / dy.h);
                for (int j = 0; j < dy.w; ++j)
                    dxp[std::size_t(si) * in_w_ + std::size_t(j) * in_w_ / dy.w] +=
                        gp[std::size_t(i) * dy.w + j];
            }
        }
    return dx;
}

// ---------------------------------------------------------------- NormLayer

NormLayer::NormLayer(NormMode mode, int channels, double eps, double momentum, std::string name)
    : mode_(mode), c_(channels), eps_(eps), momentum_(momentum), name_(std::move(name)) {
    const int sets = mode == NormMode::CondIN ? kCondInSets : 1;
    gamma.assign(std::size_t(sets) * c_, 1.0);
    beta.assign(std::size_t(sets) * c_, 0.0);
    ggamma.assign(gamma.size(), 0.0);
    gbeta.assign(beta.size(), 0.0);
    ema_mean.assign(c_, 0.0);
    ema_var.assign(c_, 1.0);
}

double* NormLayer::gamma_set(int combo) {
    return mode_ == NormMode::CondIN ? &gamma[std::size_t(combo - 1) * c_] : gamma.data();
}
const double* NormLayer::gamma_set(int combo) const {
    return mode_ == NormMode::CondIN ? &gamma[std::size_t(combo - 1) * c_] : gamma.data();
}
double* NormLayer::beta_set(int combo) {
    return mode_ == NormMode::CondIN ? &beta[std::size_t(combo - 1) * c_] : beta.data();
}
const double* NormLayer::beta_set(int combo) const {
    return mode_ == NormMode::CondIN ? &beta[std::size_t(combo - 1) * c_] : beta.data();
}

Tensor4 NormLayer::forward(const Tensor4& x, const ForwardCtx& ctx) {
    if (x.c != c_)
        throw config_error("NormLayer " + name_ + ": channel mismatch");

    combos_.assign(std::size_t(x.n), 0);
    if (mode_ == NormMode::CondIN) {
        if (!ctx.combos || int(ctx.combos->size()) != x.n)
            throw config_error("NormLayer " + name_ + ": CondIN needs per-sample combos");
        for (int n = 0; n < x.n; ++n) {
            int combo = (*ctx.combos)[n];
            if (combo < 1 || combo > kCondInSets)
                throw config_error("NormLayer " + name_ +
                                   ": invalid CondIN condition (combo must be in 1..15)");
            combos_[n] = combo;
        }
    } else {
        std::fill(combos_.begin(), combos_.end(), 1);
    }

    const std::size_t plane = std::size_t(x.h) * x.w;
    const bool frozen = ctx.phase == Phase::Infer && ctx.stats == StatsMode::TrainStats;
    stats_from_input_ = !frozen;
    per_instance_ = !frozen && !(mode_ == NormMode::BN && ctx.phase == Phase::Train);

    xhat_ = Tensor4(x.n, x.c, x.h, x.w);

    if (frozen) {
        inv_std_.assign(c_, 0.0);
        for (int j = 0; j < c_; ++j)
            inv_std_[j] = 1.0 / std::sqrt(ema_var[j] + eps_);
        for (int n = 0; n < x.n; ++n)
            for (int j = 0; j < c_; ++j) {
                const double* xp = x.plane(n, j);
                double* hp = xhat_.plane(n, j);
                const double mu = ema_mean[j], is = inv_std_[j];
                for (std::size_t i = 0; i < plane; ++i)
                    hp[i] = (xp[i] - mu) * is;
            }
    } else if (!per_instance_) {
        // BN training: per-channel statistics over (n,h,w).
        inv_std_.assign(c_, 0.0);
        const double cnt = double(x.n) * plane;
        for (int j = 0; j < c_; ++j) {
            double s = 0.0, s2 = 0.0;
            for (int n = 0; n < x.n; ++n) {
                const double* xp = x.plane(n, j);
                for (std::size_t i = 0; i < plane; ++i) {
                    s += xp[i];
                    s2 += xp[i] * xp[i];
                }
            }
            const double mu = s / cnt;
            const double var = std::max(0.0, s2 / cnt - mu * mu);
            inv_std_[j] = 1.0 / std::sqrt(var + eps_);
            for (int n = 0; n < x.n; ++n) {
                const double* xp = x.plane(n, j);
                double* hp = xhat_.plane(n, j);
                for (std::size_t i = 0; i < plane; ++i)
                    hp[i] = (xp[i] - mu) * inv_std_[j];
            }
            ema_mean[j] = (1.0 - momentum_) * ema_mean[j] + momentum_ * mu;
            ema_var[j] = (1.0 - momentum_) * ema_var[j] + momentum_ * var;
        }
    } else {
        // Instance statistics per (sample, channel) over (h,w).
        inv_std_.assign(std::size_t(x.n) * c_, 0.0);
        for (int n = 0; n < x.n; ++n)
            for (int j = 0; j < c_; ++j) {
                const double* xp = x.plane(n, j);
                double s = 0.0, s2 = 0.0;
                for (std::size_t i = 0; i < plane; ++i) {
                    s += xp[i];
                    s2 += xp[i] * xp[i];
                }
                const double mu = s / double(plane);
                const double var = std::max(0.0, s2 / double(plane) - mu * mu);
                const double is = 1.0 / std::sqrt(var + eps_);
                inv_std_[std::size_t(n) * c_ + j] = is;
                double* hp = xhat_.plane(n, j);
                for (std::size_t i = 0; i < plane; ++i)
                    hp[i] = (xp[i] - mu) * is;
            }
        if (ctx.phase == Phase::Train) {
            // Track batch-statistic moving averages for train-stats probing.
            const double cnt = double(x.n) * plane;
            for (int j = 0; j < c_; ++j) {
                double s = 0.0, s2 = 0.0;
                for (int n = 0; n < x.n; ++n) {
                    const double* xp = x.plane(n, j);
                    for (std::size_t i = 0; i < plane; ++i) {
                        s += xp[i];
                        s2 += xp[i] * xp[i];
                    }
                }
                const double mu = s / cnt;
                const double var = std::max(0.0, s2 / cnt - mu * mu);
                ema_mean[j] = (1.0 - momentum_) * ema_mean[j] + momentum_ * mu;
                ema_var[j] = (1.0 - momentum_) * ema_var[j] + momentum_ * var;
            }
        }
    }

    Tensor4 y(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n) {
        const double* gs = gamma_set(combos_[n]);
        const double* bs = beta_set(combos_[n]);
        for (int j = 0; j < c_; ++j) {
            const double* hp = xhat_.plane(n, j);
            double* yp = y.plane(n, j);
            for (std::size_t i = 0; i < plane; ++i)
                yp[i] = gs[j] * hp[i] + bs[j];
        }
    }
    return y;
}

Tensor4 NormLayer::backward(const Tensor4& dy) {
    const int N = dy.n;
    const std::size_t plane = std::size_t(dy.h) * dy.w;
    Tensor4 dx(dy.n, dy.c, dy.h, dy.w);

    // Affine gradients.
    for (int n = 0; n < N; ++n) {
        const std::size_t set_off =
            mode_ == NormMode::CondIN ? std::size_t(combos_[n] - 1) * c_ : 0;
        for (int j = 0; j < c_; ++j) {
            const double* gp = dy.plane(n, j);
            const double* hp = xhat_.plane(n, j);
            double sg = 0.0, sb = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                sg += gp[i] * hp[i];
                sb += gp[i];
            }
            ggamma[set_off + j] += sg;
            gbeta[set_off + j] += sb;
        }
    }

    if (!stats_from_input_) {
        // Frozen statistics: elementwise affine map.
        for (int n = 0; n < N; ++n) {
            const double* gs = gamma_set(combos_[n]);
            for (int j = 0; j < c_; ++j) {
                const double* gp = dy.plane(n, j);
                double* dxp = dx.plane(n, j);
                const double k = gs[j] * inv_std_[j];
                for (std::size_t i = 0; i < plane; ++i)
                    dxp[i] = k * gp[i];
            }
        }
        return dx;
    }

    if (!per_instance_) {
        // BN training backward: statistics span the whole batch per channel.
        const double cnt = double(N) * plane;
        for (int j = 0; j < c_; ++j) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (int n = 0; n < N; ++n) {
                const double g = gamma_set(combos_[n])[j];
                const double* gp = dy.plane(n, j);
                const double* hp = xhat_.plane(n, j);
                for (std::size_t i = 0; i < plane; ++i) {
                    const double dh = g * gp[i];
                    sum_dh += dh;
                    sum_dh_h += dh * hp[i];
                }
            }
            const double m_dh = sum_dh / cnt;
            const double m_dh_h = sum_dh_h / cnt;
            for (int n = 0; n < N; ++n) {
                const double g = gamma_set(combos_[n])[j];
                const double* gp = dy.plane(n, j);
                const double* hp = xhat_.plane(n, j);
                double* dxp = dx.plane(n, j);
                for (std::size_t i = 0; i < plane; ++i)
                    dxp[i] = inv_std_[j] * (g * gp[i] - m_dh - hp[i] * m_dh_h);
            }
        }
        return dx;
    }

    // Instance statistics backward, one group per (sample, channel).
    for (int n = 0; n < N; ++n) {
        const double* gs = gamma_set(combos_[n]);
        for (int j = 0; j < c_; ++j) {
            const double* gp = dy.plane(n, j);
            const double* hp = xhat_.plane(n, j);
            double* dxp = dx.plane(n, j);
            const double g = gs[j];
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                const double dh = g * gp[i];
                sum_dh += dh;
                sum_dh_h += dh * hp[i];
            }
            const double m_dh = sum_dh / double(plane);
            const double m_dh_h = sum_dh_h / double(plane);
            const double is = inv_std_[std::size_t(n) * c_ + j];
            for (std::size_t i = 0; i < plane; ++i)
                dxp[i] = is * (g * gp[i] - m_dh - hp[i] * m_dh_h);
        }
    }
    return dx;
}

void NormLayer::collect(std::vector<ParamView>& out) {
    out.push_back({name_ + ".gamma", &gamma, &ggamma});
    out.push_back({name_ + ".beta", &beta, &gbeta});
}

// ---------------------------------------------------------------- concat

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw config_error("concat_channels: shape mismatch");
    Tensor4 y(a.n, a.c + b.c, a.h, a.w);
    const std::size_t plane = std::size_t(a.h) * a.w;
    for (int n = 0; n < a.n; ++n) {
        for (int c = 0; c < a.c; ++c)
            std::copy_n(a.plane(n, c), plane, y.plane(n, c));
        for (int c = 0; c < b.c; ++c)
            std::copy_n(b.plane(n, c), plane, y.plane(n, a.c + c));
    }
    return y;
}

void split_channels(const Tensor4& d, int ca, Tensor4& da, Tensor4& db) {
    da = Tensor4(d.n, ca, d.h, d.w);
    db = Tensor4(d.n, d.c - ca, d.h, d.w);
    const std::size_t plane = std::size_t(d.h) * d.w;
    for (int n = 0; n < d.n; ++n) {
        for (int c = 0; c < ca; ++c)
            std::copy_n(d.plane(n, c), plane, da.plane(n, c));
        for (int c = 0; c < d.c - ca; ++c)
            std::copy_n(d.plane(n, ca + c), plane, db.plane(n, c));
    }
}

} // namespace lesionseg
