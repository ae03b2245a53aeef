#ifndef LESIONSEG_GRADCHECK_HPP
#define LESIONSEG_GRADCHECK_HPP

#include "lesionseg/unet.hpp"

namespace lesionseg {

// Central finite-difference validation of the analytic training gradients.
// Returns max over sampled parameters of
//   |analytic - (f(w+h) - f(w-h)) / 2h| / (|analytic| + 1e-8)
// where f is the mean squared error of the net output against a fixed
// random target, evaluated in training phase.
//
// Intended for tiny nets (<= 2 levels, <= 4 channels) and tiny slabs.
// max_params bounds how many parameters are probed (stride-sampled across
// every tensor); 0 means all.
double backward_check(UNet& net, int batch, int h_in, int w_in, std::uint64_t seed,
                      double fd_step = 1e-4, std::size_t max_params = 0);

} // namespace lesionseg

#endif
