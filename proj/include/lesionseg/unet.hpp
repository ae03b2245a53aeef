#ifndef LESIONSEG_UNET_HPP
#define LESIONSEG_UNET_HPP

#include <iosfwd>
#include <memory>

#include "lesionseg/layers.hpp"
#include "lesionseg/orient.hpp"
#include "lesionseg/volume.hpp"

namespace lesionseg {

struct NetConfig {
    int in_channels = 3 * kNumContrasts; // 2.5D slab: 3 slices per contrast
    std::vector<int> channels = {8, 16, 32};
    NormMode norm = NormMode::BN;
    bool norm_before_act = true; // conv -> norm -> relu; false: conv -> relu -> norm
    double eps = 1e-5;
    double momentum = 0.1;

    int levels() const { return int(channels.size()); }
    void validate() const;

    static NetConfig desk_default() { return NetConfig{}; }
    // Full-scale preset: 5 levels, 64..1024 channels.
    static NetConfig full_scale() {
        NetConfig c;
        c.channels = {64, 128, 256, 512, 1024};
        return c;
    }
};

// Encoder-decoder segmentation net on 2.5D slabs. Two conv blocks per level,
// 2x2 max-pool downsampling, nearest-neighbor upsampling followed by a
// convolution, skip concatenation, 1x1 head, sigmoid output for the center
// slice. Value semantics: copies are independent nets.
class UNet {
public:
    UNet() = default;
    explicit UNet(NetConfig cfg);

    void init_weights(std::uint64_t seed);

    const NetConfig& config() const { return cfg_; }

    // x: (n, in_channels, H, W) -> (n, 1, H, W), values in [0,1].
    Tensor4 forward(const Tensor4& x, const ForwardCtx& ctx);
    Tensor4 backward(const Tensor4& dy);

    std::vector<ParamView> params();
    void zero_grads();
    std::size_t param_count();

    std::vector<NormLayer*> norm_layers();
    // Designated layers for statistics export.
    NormLayer& shallow_norm();
    NormLayer& deep_norm();

    // Probability map of the slab's center slice, row-major (h, w).
    std::vector<double> forward_slab(const Slab25D& slab, StatsMode stats);

    // Slab-wise inference along `plane`, stacking thresholded (p > 0.5)
    // center-slice masks into a 3D mask.
    BinaryMask3D predict_volume(const MultiContrastVolume& mcv, Plane plane, StatsMode stats);

private:
    struct ConvBlock {
        Conv2D conv;
        NormLayer norm;
        ReLU relu;
        bool norm_first = true;

        Tensor4 forward(const Tensor4& x, const ForwardCtx& ctx);
        Tensor4 backward(const Tensor4& dy);
    };
    struct EncLevel {
        ConvBlock a, b;
        MaxPool2 pool;
    };
    struct DecLevel {
        NearestUpsample up;
        ConvBlock upconv, a, b;
    };

    NetConfig cfg_;
    std::vector<EncLevel> enc_;
    ConvBlock bottom_a_, bottom_b_;
    std::vector<DecLevel> dec_;
    Conv2D head_;
    Sigmoid out_;

    std::vector<Tensor4> skips_;
    std::vector<Tensor4> dskips_;
};

// Network input assembly: slab channels as a batch-1 tensor.
Tensor4 slab_to_tensor(const Slab25D& slab);

struct NormStatRecord {
    std::string input_id;
    std::string layer_id;
    int channel = 0;
    double mean = 0, var = 0;
};

// Channel-wise mean/variance of the pre-affine normalized features of the
// designated shallow and deep layers, one record per (input, layer, channel).
std::vector<NormStatRecord> export_norm_stats(UNet& net, const std::vector<Slab25D>& inputs,
                                              StatsMode stats);
void write_norm_stats_csv(const std::vector<NormStatRecord>& records, std::ostream& os);

} // namespace lesionseg

#endif
