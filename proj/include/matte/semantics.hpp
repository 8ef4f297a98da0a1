#pragma once

#include <string>

#include "matte/tensor.hpp"

namespace matte {

/// SO: salient opaque, STM: salient transparent/meticulous, NS: non-salient.
enum class ImageType { SO, STM, NS };

std::string to_string(ImageType t);
ImageType parse_image_type(const std::string& token);

using ClassMap = Eigen::ArrayXXi;  // 0 = background, 1 = transition, 2 = foreground

/// Foreground/background/transition map from ground-truth alpha.
/// Foreground: erosion of {a >= 0.95} by a disk of radius erode_px -> 1.
/// Background: complement of the dilation of {a > 0.05} by dilate_px -> 0.
/// Everything else -> 0.5.
Plane trimap_from_alpha(const Plane& alpha, int erode_px, int dilate_px);

/// Collapses a trimap to the per-type semantic target:
///   SO  : u = t
///   STM : u = 1.5 t - t^2   (drops the foreground class, keeps {0, 0.5})
///   NS  : u = 0.5
Plane unify(const Plane& trimap, ImageType type);

/// Histogram heuristic over alpha values; a manifest-provided type always
/// takes precedence over this guess.
ImageType classify_type(const Plane& alpha);

ClassMap rep_to_classes(const Plane& rep);
Plane classes_to_rep(const ClassMap& classes);

struct IouAccuracy {
    double iou = 0.0;       // mean over classes present in gt
    double accuracy = 0.0;  // plain pixel accuracy
};
IouAccuracy semantic_iou_accuracy(const ClassMap& pred, const ClassMap& gt);

/// Exact squared Euclidean distance from every pixel to the nearest true
/// pixel of mask (two-pass lower-envelope transform). Infinity-free: empty
/// masks give a large sentinel.
Eigen::ArrayXXd squared_distance_transform(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask);

}  // namespace matte
