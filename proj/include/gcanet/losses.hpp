#pragma once

#include "gcanet/tensor.hpp"

namespace gcanet {

class Generator;
class Discriminator;

// Hybrid objective weights: lambda scales the cross-entropy term, w_fg/w_bg
// are the per-class voxel weights of the weighted BCE.
struct LossWeights {
    double lambda = 100.0;
    double w_fg = 1.0;
    double w_bg = 1.0;
};

// Per-class weights w_c = N_total / (2 N_c), clamped to [0.1, 10];
// an absent class gets weight 1.
std::pair<double, double> class_weights(const Tensor& y);  // (w_fg, w_bg)

// Mean over voxels of -[w_fg y log p + w_bg (1-y) log(1-p)], logs clamped
// at 1e-7. y is treated as constant data.
Tensor weighted_bce(const Tensor& p, const Tensor& y, double w_fg, double w_bg);

// Numerically stable BCE on logits against a constant target (0 or 1),
// mean over batch.
Tensor gan_bce(const Tensor& logits, double target);

// Eq-style composite losses. generator_loss propagates no gradient into D
// parameters; discriminator_loss treats G(x) as a constant.
Tensor generator_loss(Generator& g, Discriminator& d, const Tensor& x, const Tensor& y,
                      const LossWeights& w);
Tensor discriminator_loss(Generator& g, Discriminator& d, const Tensor& x,
                          const Tensor& y);

}  // namespace gcanet
