#include "lesionseg/gradcheck.hpp"

#include <cmath>
#include <random>

namespace lesionseg {

double backward_check(UNet& net, int batch, int h_in, int w_in, std::uint64_t seed,
                      double fd_step, std::size_t max_params) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Tensor4 x(batch, net.config().in_channels, h_in, w_in);
    for (double& v : x.v)
        v = gauss(rng);
    Tensor4 target(batch, 1, h_in, w_in);
    for (double& v : target.v)
        v = unif(rng);

    std::vector<int> combos(batch);
    std::uniform_int_distribution<int> combo_dist(1, kCondInSets);
    for (int& c : combos)
        c = combo_dist(rng);
    ForwardCtx ctx{Phase::Train, StatsMode::TrainStats, &combos};

    auto loss_of = [&](const Tensor4& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) {
            double d = y.v[i] - target.v[i];
            s += d * d;
        }
        return s / double(y.v.size());
    };

    // Analytic gradients.
    net.zero_grads();
    Tensor4 y = net.forward(x, ctx);
    Tensor4 dy(y.n, y.c, y.h, y.w);
    for (std::size_t i = 0; i < y.v.size(); ++i)
        dy.v[i] = 2.0 * (y.v[i] - target.v[i]) / double(y.v.size());
    (void)net.backward(dy);

    double worst = 0.0;
    auto params = net.params();
    std::size_t total = 0;
    for (auto& p : params)
        total += p.w->size();
    const std::size_t budget = max_params == 0 ? total : max_params;
    // Sample roughly evenly across all tensors.
    const std::size_t stride = std::max<std::size_t>(1, total / budget);

    std::size_t flat = 0;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.w->size(); ++i, ++flat) {
            if (flat % stride != 0)
                continue;
            const double orig = (*p.w)[i];
            (*p.w)[i] = orig + fd_step;
            const double lp = loss_of(net.forward(x, ctx));
            (*p.w)[i] = orig - fd_step;
            const double lm = loss_of(net.forward(x, ctx));
            (*p.w)[i] = orig;

            const double fd = (lp - lm) / (2.0 * fd_step);
            const double analytic = (*p.g)[i];
            const double rel = std::abs(analytic - fd) / (std::abs(analytic) + 1e-8);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace lesionseg
