#pragma once

#include "drivercal/analysis.hpp"

#include <optional>
#include <string>
#include <vector>

namespace drivercal::svg {

// Self-contained SVG documents (no external assets), deterministic output.

struct Band {
  double center = 0.0;
  double halfwidth = 0.0;
};

// Histogram as a bar chart; an optional reference band is drawn as a shaded
// vertical strip with a center line (used for shared-fit +/- noise bands).
std::string histogram_chart(const analysis::Histogram& hist,
                            const std::string& title,
                            const std::string& x_label,
                            const std::optional<Band>& band = std::nullopt);

struct ErrorBarSeries {
  std::string name;
  std::vector<double> means;  // one per category
  std::vector<double> ses;
};

// Grouped mean +/- standard error chart over shared categories.
std::string errorbar_chart(const std::vector<std::string>& categories,
                           const std::vector<ErrorBarSeries>& series,
                           const std::string& title,
                           const std::string& y_label);

}  // namespace drivercal::svg
