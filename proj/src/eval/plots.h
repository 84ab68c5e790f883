#pragma once

#include <string>
#include <vector>

namespace dgad {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Self-contained SVG plot writers for evaluation reports.
void write_roc_svg(const std::string& path, const std::vector<RocPoint>& points, double auc, const std::string& title);

void write_histogram_svg(const std::string& path, const std::vector<double>& normal_scores,
                         const std::vector<double>& anomalous_scores, int64_t bins, const std::string& title);

}  // namespace dgad
