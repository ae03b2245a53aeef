#ifndef LESIONSEG_CHECKPOINT_HPP
#define LESIONSEG_CHECKPOINT_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "lesionseg/unet.hpp"

namespace lesionseg {

// Optimizer/trainer state carried alongside the weights so training can
// resume exactly.
struct TrainerState {
    std::vector<double> adam_m, adam_v; // flat, in params() order
    std::int64_t adam_step = 0;
    std::int64_t trained_iters = 0;
};

// Versioned binary blob: config echo (JSON), weight tensors in declared
// order, moving averages, optional trainer state.
void save_checkpoint(UNet& net, const std::string& path,
                     const TrainerState* state = nullptr);

UNet load_checkpoint(const std::string& path, TrainerState* state = nullptr);

// Config echo of a checkpoint without loading weights into a net.
std::string checkpoint_config_json(const std::string& path);

} // namespace lesionseg

#endif
