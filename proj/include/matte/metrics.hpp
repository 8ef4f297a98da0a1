#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "matte/semantics.hpp"
#include "matte/tensor.hpp"

namespace matte {

/// SAD, Grad and Conn are reported divided by 1000 so magnitudes line up with
/// the usual benchmark tables (a 1000-pixel total absolute error reads 1.0);
/// MSE and MAD are plain per-pixel means.
double sad(const Plane& pred, const Plane& gt);
double mse(const Plane& pred, const Plane& gt);
double mad(const Plane& pred, const Plane& gt);

/// Sum of squared differences of Gaussian-derivative gradient magnitudes,
/// divided by 1000. First-order derivative-of-Gaussian filters, reflect
/// borders, q = 2.
double gradient_error(const Plane& pred, const Plane& gt, double sigma = 1.4);

/// Connectivity error: per-threshold largest connected component of
/// {pred >= t} & {gt >= t} (4-connectivity) defines the source region; each
/// pixel keeps the last threshold at which it was still connected; the
/// penalty compares 1 - d*(d >= theta) between pred and gt. Divided by 1000.
double connectivity_error(const Plane& pred, const Plane& gt, double theta = 0.15,
                          double step = 0.1);

/// SAD restricted to {gt_trimap == 0.5}.
double transition_sad(const Plane& pred, const Plane& gt, const Plane& gt_trimap);

/// Canonical category order used in reports.
inline constexpr std::array<const char*, 7> kCategories = {
    "animal", "human", "transparent", "plant", "furniture", "toy", "fruit"};
inline constexpr std::array<const char*, 7> kCategoryDisplay = {
    "Animal", "Human", "Transp.", "Plant", "Furni.", "Toy", "Fruit"};

/// Returns the canonical token ("portrait" folds into "human", unknown into
/// "other") or throws DataError when strict.
std::string canonical_category(const std::string& token, bool strict);

struct MetricRecord {
    std::string id;
    double sad = 0.0, mse = 0.0, mad = 0.0, conn = 0.0, grad = 0.0, sad_transition = 0.0;
    ImageType type = ImageType::SO;
    std::string category = "other";
    int height = 0, width = 0;
};

MetricRecord evaluate_image(const std::string& id, const Plane& pred, const Plane& gt,
                            const Plane& gt_trimap, ImageType type, const std::string& category);

struct MetricReport {
    std::vector<MetricRecord> records;  // sorted by id
    // whole-image means
    double sad = 0.0, mse = 0.0, mad = 0.0, conn = 0.0, grad = 0.0, sad_transition = 0.0;
    // per-type SAD means; the average is the unweighted mean of present types
    std::optional<double> sad_so, sad_stm, sad_ns;
    double sad_type_avg = 0.0;
    // per-category SAD means in kCategories order + their unweighted average
    std::array<std::optional<double>, 7> sad_category;
    double sad_category_avg = 0.0;
};

MetricReport aggregate(std::vector<MetricRecord> records);

}  // namespace matte
