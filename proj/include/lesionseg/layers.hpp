#ifndef LESIONSEG_LAYERS_HPP
#define LESIONSEG_LAYERS_HPP

#include <random>
#include <string>
#include <vector>

#include "lesionseg/tensor.hpp"

namespace lesionseg {

enum class Phase { Train, Infer };

// Statistics source at inference: moving averages accumulated in training, or
// per-input instance statistics (test-time instance normalization).
enum class StatsMode { TrainStats, InstanceStats };

enum class NormMode { BN, IN, CondIN };
std::string norm_mode_name(NormMode m);
NormMode parse_norm_mode(const std::string& s);

inline constexpr int kCondInSets = 15; // nonempty subsets of 4 contrasts

// Per-batch context threaded through every layer.
struct ForwardCtx {
    Phase phase = Phase::Infer;
    StatsMode stats = StatsMode::TrainStats;
    // Per-sample contrast-availability mask (1..15); required for CondIN.
    const std::vector<int>* combos = nullptr;
};

struct ParamView {
    std::string name;
    std::vector<double>* w;
    std::vector<double>* g;
};

// 2D convolution, stride 1, zero padding k/2 (same spatial size).
class Conv2D {
public:
    Conv2D() = default;
    Conv2D(int cin, int cout, int k, std::string name);

    void init_he(std::mt19937_64& rng);
    Tensor4 forward(const Tensor4& x);
    Tensor4 backward(const Tensor4& dy); // accumulates into gw/gb
    void collect(std::vector<ParamView>& out);

    int cin() const { return cin_; }
    int cout() const { return cout_; }

    std::vector<double> w, b;   // w: [cout][cin][k][k]
    std::vector<double> gw, gb;

private:
    int cin_ = 0, cout_ = 0, k_ = 3, pad_ = 1;
    std::string name_;
    Tensor4 x_; // cached input
};

class ReLU {
public:
    Tensor4 forward(const Tensor4& x);
    Tensor4 backward(const Tensor4& dy);

private:
    std::vector<std::uint8_t> mask_;
};

class Sigmoid {
public:
    Tensor4 forward(const Tensor4& x);
    Tensor4 backward(const Tensor4& dy);

private:
    Tensor4 y_;
};

// 2x2 max pooling, stride 2, floor output size (trailing odd row/col dropped).
class MaxPool2 {
public:
    Tensor4 forward(const Tensor4& x);
    Tensor4 backward(const Tensor4& dy);

private:
    int in_h_ = 0, in_w_ = 0;
    std::vector<std::int32_t> argmax_;
};

// Nearest-neighbor upsampling to an explicit target size:
// out(i,j) = in(i*in_h/out_h, j*in_w/out_w).
class NearestUpsample {
public:
    void set_target(int h, int w) {
        target_h_ = h;
        target_w_ = w;
    }
    Tensor4 forward(const Tensor4& x);
    Tensor4 backward(const Tensor4& dy);

private:
    int target_h_ = 0, target_w_ = 0;
    int in_h_ = 0, in_w_ = 0;
};

// Feature normalization: xhat = (x - E[x]) / sqrt(Var[x] + eps),
// y = gamma * xhat + beta, with population variance.
//
// BN training normalizes per channel over (n,h,w) and updates moving
// averages; IN/CondIN normalize per (sample, channel) over (h,w). Moving
// averages of the batch statistics are tracked in every mode so any trained
// net can be probed with train stats. Inference uses the moving averages
// (TrainStats) or per-instance statistics (InstanceStats). CondIN keeps one
// (gamma, beta) set per contrast combination, selected per sample.
class NormLayer {
public:
    NormLayer() = default;
    NormLayer(NormMode mode, int channels, double eps, double momentum, std::string name);

    Tensor4 forward(const Tensor4& x, const ForwardCtx& ctx);
    Tensor4 backward(const Tensor4& dy);
    void collect(std::vector<ParamView>& out);

    NormMode mode() const { return mode_; }
    int channels() const { return c_; }
    const std::string& name() const { return name_; }

    // Pre-affine normalized features from the last forward (stats export).
    const Tensor4& last_xhat() const { return xhat_; }

    std::vector<double> gamma, beta;   // size c, or kCondInSets*c for CondIN
    std::vector<double> ggamma, gbeta;
    std::vector<double> ema_mean, ema_var; // size c

private:
    double* gamma_set(int combo);
    const double* gamma_set(int combo) const;
    double* beta_set(int combo);
    const double* beta_set(int combo) const;

    NormMode mode_ = NormMode::BN;
    int c_ = 0;
    double eps_ = 1e-5;
    double momentum_ = 0.1;
    std::string name_;

    // backward caches
    Tensor4 xhat_;
    std::vector<double> inv_std_;    // per normalization group
    bool stats_from_input_ = false;  // batch/instance stats (vs frozen MAs)
    bool per_instance_ = false;
    std::vector<int> combos_;
};

// Channel concatenation [a; b] and its split.
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
void split_channels(const Tensor4& d, int ca, Tensor4& da, Tensor4& db);

} // namespace lesionseg

#endif
