#pragma once

#include "matte/semantics.hpp"
#include "matte/tensor.hpp"

namespace matte {

/// Blends a semantic map u and a raw matting prediction m into the final
/// alpha: a = (1 - 2|u - 0.5|) * m + 2|u - 0.5| * u. Where u is 0 or 1 the
/// semantic value wins outright; where u is 0.5 the matting value passes
/// through unchanged.
Plane fuse(const Plane& u, const Plane& m);

struct LossResult {
    double value = 0.0;
    Eigen::ArrayXXd grad;  // d value / d pred
};

/// Charbonnier penalty mean(sqrt((p-g)^2 + eps^2)).
LossResult alpha_loss(const Plane& pred, const Plane& gt, double eps = 1e-6);

/// sum_{i=1..levels} 2^(i-1) * mean|Lap_i(pred) - Lap_i(gt)| over a
/// Burt-Adelson pyramid with the 5-tap binomial kernel [1,4,6,4,1]/16,
/// reflect borders, zero-stuffed upsampling. Gradient goes through the
/// exact transpose of every pyramid stage.
LossResult laplacian_loss(const Plane& pred, const Plane& gt, int levels = 5);

/// Charbonnier mean over pixels and channels of (a*F + (1-a)*B - I), with
/// the gradient taken with respect to the alpha plane.
LossResult composition_loss(const Plane& alpha, const Image& fg, const Image& bg,
                            const Image& image, double eps = 1e-6);

struct CeResult {
    double value = 0.0;
    Tensor grad;  // same shape as the logits
};

/// Mean pixelwise -log softmax(logits)[target]; logits are 1 x C x H x W.
CeResult semantic_ce(const Tensor& logits, const ClassMap& target);

struct LossWeights {
    double alpha = 1.0, laplacian = 1.0, composition = 1.0, semantic_ce = 1.0;
};

struct LossBundle {
    double alpha_term = 0.0;
    double laplacian_term = 0.0;
    double composition_term = 0.0;
    double semantic_ce_term = 0.0;

    double total(const LossWeights& w = {}) const {
        return w.alpha * alpha_term + w.laplacian * laplacian_term +
               w.composition * composition_term + w.semantic_ce * semantic_ce_term;
    }
};

}  // namespace matte
