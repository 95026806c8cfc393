#pragma once

#include <string>

#include "adaseg/training.hpp"

namespace adaseg {

/// Validation DSC per structure against epoch as an SVG line chart. The
/// structure named by `highlight` (the added one when empty and the curve
/// has epoch_added) is drawn bold, and a dashed vertical line marks
/// epoch_added.
std::string learning_curve_svg(const LearningCurve& curve, const std::string& title = "",
                               const std::string& highlight = "");

}  // namespace adaseg
