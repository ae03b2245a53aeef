#include "lesionseg/train.hpp"

#include <cmath>

namespace lesionseg {

void TrainConfig::validate() const {
    if (iterations < 1 || batch_size < 1)
        throw config_error("TrainConfig: iterations and batch_size must be positive");
    if (lr <= 0.0)
        throw config_error("TrainConfig: lr must be positive");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
        throw config_error("TrainConfig: betas must be in (0,1)");
}

void Adam::step(std::vector<ParamView>& params) {
    std::size_t total = 0;
    for (auto& p : params)
        total += p.w->size();
    if (m.empty()) {
        m.assign(total, 0.0);
        v.assign(total, 0.0);
    }
    if (m.size() != total)
        throw config_error("Adam: state size mismatch");

    ++t;
    const double bc1 = 1.0 - std::pow(beta1_, double(t));
    const double bc2 = 1.0 - std::pow(beta2_, double(t));

    std::size_t off = 0;
    for (auto& p : params) {
        double* w = p.w->data();
        const double* g = p.g->data();
        for (std::size_t i = 0; i < p.w->size(); ++i) {
            const std::size_t k = off + i;
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[i];
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        off += p.w->size();
    }
}

int sample_kept_subset(int availability_mask, std::mt19937_64& rng) {
    if (availability_mask == 0)
        throw config_error("sample_kept_subset: availability must be nonzero");
    std::vector<int> bits;
    for (int i = 0; i < kNumContrasts; ++i)
        if (availability_mask & (1 << i))
            bits.push_back(i);
    const int n_subsets = (1 << bits.size()) - 1; // nonempty subsets
    std::uniform_int_distribution<int> dist(1, n_subsets);
    const int pick = dist(rng);
    int kept = 0;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (pick & (1 << i))
            kept |= 1 << bits[i];
    return kept;
}

MultiContrastVolume contrast_dropout(const MultiContrastVolume& mcv, std::mt19937_64& rng) {
    const int kept = sample_kept_subset(mcv.availability_mask(), rng);
    MultiContrastVolume out;
    for (Contrast c : kAllContrasts)
        if (kept & (1 << int(c)))
            out.set(c, mcv.volume(c));
    return out;
}

std::vector<int> lesion_slice_indices(const BinaryMask3D& mask, Plane plane) {
    const int n = plane_extent(mask.dims(), plane);
    std::vector<int> out;
    for (int s = 0; s < n; ++s) {
        auto slice = get_slice(mask, plane, s);
        for (std::uint8_t v : slice)
            if (v) {
                out.push_back(s);
                break;
            }
    }
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

Trainer::Trainer(UNet& net, TrainConfig cfg) : net_(net), cfg_(std::move(cfg)) {
    cfg_.validate();
    opt_ = Adam(cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
    rng_subject_.seed(splitmix64(cfg_.seed * 6 + 1));
    rng_slab_.seed(splitmix64(cfg_.seed * 6 + 2));
    rng_rater_.seed(splitmix64(cfg_.seed * 6 + 3));
    rng_dropout_.seed(splitmix64(cfg_.seed * 6 + 4));
    rng_spatial_.seed(splitmix64(cfg_.seed * 6 + 5));
    rng_orient_.seed(splitmix64(cfg_.seed * 6 + 6));
}

double Trainer::train_step(const std::vector<Subject>& dataset) {
    if (dataset.empty())
        throw data_error("train: empty dataset");

    std::uniform_int_distribution<int> plane_dist(0, 2);
    std::uniform_int_distribution<int> dihedral_dist(0, 7);
    const Plane plane = Plane(plane_dist(rng_orient_));
    const int dihedral = dihedral_dist(rng_orient_);

    std::uniform_int_distribution<int> subject_dist(0, int(dataset.size()) - 1);

    std::vector<Slab25D> slabs;
    std::vector<std::vector<std::uint8_t>> labels;
    std::vector<int> lab_h, lab_w;

    for (int b = 0; b < cfg_.batch_size; ++b) {
        bool found = false;
        for (int attempt = 0; attempt < 100 && !found; ++attempt) {
            const Subject& src = dataset[subject_dist(rng_subject_)];
            MultiContrastVolume image = src.image;
            BinaryMask3D r1 = src.rater1, r2 = src.rater2;
            if (cfg_.spatial_augment)
                augment_in_place(image, r1, r2, cfg_.aug, rng_spatial_);

            int rater = 1;
            if (cfg_.rater_sampling) {
                std::uniform_int_distribution<int> rd(1, 2);
                rater = rd(rng_rater_);
            }
            const BinaryMask3D* mask = rater == 1 ? &r1 : &r2;
            std::vector<int> candidates = lesion_slice_indices(*mask, plane);
            if (candidates.empty()) {
                // Augmentation can empty a mask; retry from the raw subject.
                image = src.image;
                r1 = src.rater1;
                r2 = src.rater2;
                mask = rater == 1 ? &r1 : &r2;
                candidates = lesion_slice_indices(*mask, plane);
            }
            if (candidates.empty()) {
                mask = rater == 1 ? &r2 : &r1;
                candidates = lesion_slice_indices(*mask, plane);
            }
            if (candidates.empty())
                continue; // subject has no lesion voxels at all; resample

            std::uniform_int_distribution<int> pick(0, int(candidates.size()) - 1);
            const int index = candidates[pick(rng_slab_)];

            Slab25D slab = extract_slab(image, plane, index);
            std::vector<std::uint8_t> label = get_slice(*mask, plane, index);

            if (cfg_.contrast_dropout) {
                const int kept = sample_kept_subset(slab.availability, rng_dropout_);
                for (int c = 0; c < kNumContrasts; ++c) {
                    if (kept & (1 << c))
                        continue;
                    for (int ch = c * 3; ch < c * 3 + 3; ++ch)
                        std::fill_n(slab.channels.begin() + slab.idx(ch, 0, 0),
                                    std::size_t(slab.h) * slab.w, 0.0f);
                }
                slab.availability = kept;
            }

            // Shared in-plane augmentation on every channel and the label.
            int sh = slab.h, sw = slab.w;
            std::vector<float> moved(slab.channels.size());
            for (int ch = 0; ch < 3 * kNumContrasts; ++ch) {
                int hh = slab.h, ww = slab.w;
                std::vector<float> chan(slab.channels.begin() + slab.idx(ch, 0, 0),
                                        slab.channels.begin() + slab.idx(ch, 0, 0) +
                                            std::size_t(slab.h) * slab.w);
                auto out = dihedral_2d(dihedral, chan, hh, ww);
                sh = hh;
                sw = ww;
                std::copy(out.begin(), out.end(),
                          moved.begin() + std::size_t(ch) * out.size());
            }
            int lh = slab.h, lw = slab.w;
            label = dihedral_2d(dihedral, label, lh, lw);

            slab.channels = std::move(moved);
            slab.h = sh;
            slab.w = sw;
            slabs.push_back(std::move(slab));
            labels.push_back(std::move(label));
            lab_h.push_back(lh);
            lab_w.push_back(lw);
            found = true;
        }
        if (!found)
            throw data_error("train: dataset has no lesion voxels to sample");
    }

    const int H = slabs[0].h, W = slabs[0].w;
    for (const auto& s : slabs)
        if (s.h != H || s.w != W)
            throw data_error("train: subjects must share volume dims");

    Tensor4 x(cfg_.batch_size, 3 * kNumContrasts, H, W);
    Tensor4 target(cfg_.batch_size, 1, H, W);
    std::vector<int> combos(cfg_.batch_size);
    for (int b = 0; b < cfg_.batch_size; ++b) {
        std::copy(slabs[b].channels.begin(), slabs[b].channels.end(),
                  x.v.begin() + x.idx(b, 0, 0, 0));
        for (std::size_t i = 0; i < labels[b].size(); ++i)
            target.v[target.idx(b, 0, 0, 0) + i] = double(labels[b][i]);
        combos[b] = slabs[b].availability;
    }

    ForwardCtx ctx{Phase::Train, StatsMode::TrainStats, &combos};
    net_.zero_grads();
    Tensor4 y = net_.forward(x, ctx);

    double loss = 0.0;
    Tensor4 dy(y.n, y.c, y.h, y.w);
    for (std::size_t i = 0; i < y.v.size(); ++i) {
        const double d = y.v[i] - target.v[i];
        loss += d * d;
        dy.v[i] = 2.0 * d / double(y.v.size());
    }
    loss /= double(y.v.size());

    (void)net_.backward(dy);
    auto params = net_.params();
    opt_.step(params);
    ++iter_;
    return loss;
}

std::vector<double> Trainer::run(const std::vector<Subject>& dataset, int iterations) {
    bool any_lesion = false;
    for (const auto& s : dataset)
        if (s.rater1.count() > 0 || s.rater2.count() > 0)
            any_lesion = true;
    if (!any_lesion)
        throw data_error("train: dataset has no lesion voxels to sample");

    std::vector<double> losses;
    losses.reserve(std::size_t(iterations));
    for (int i = 0; i < iterations; ++i)
        losses.push_back(train_step(dataset));
    return losses;
}

TrainerState Trainer::state() const {
    TrainerState st;
    st.adam_m = opt_.m;
    st.adam_v = opt_.v;
    st.adam_step = opt_.t;
    st.trained_iters = iter_;
    return st;
}

void Trainer::restore(const TrainerState& st) {
    opt_.m = st.adam_m;
    opt_.v = st.adam_v;
    opt_.t = st.adam_step;
    iter_ = st.trained_iters;
}

} // namespace lesionseg
