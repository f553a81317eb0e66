// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Part-mIoU evaluation: area-weighted confusion matrices and the multi-run
// summary report.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "mvseg/mesh.hpp"

namespace mvseg {

/// Rows are ground truth, columns prediction, entries are summed triangle
/// surface area.
struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<double> counts;  // n_classes^2, row-major

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int n)
      : n_classes(n), counts(size_t(n) * n, 0.0) {}

  double& at(int gt, int pred) { return counts[size_t(gt) * n_classes + pred]; }
  double at(int gt, int pred) const {
    return counts[size_t(gt) * n_classes + pred];
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
};

/// Adds each triangle's area at (gt, pred). Triangles labeled kUnlabeled on
/// either side are skipped.
void accumulate(ConfusionMatrix& cm, const FaceLabels& gt,
                const FaceLabels& pred, const TriMesh& mesh);

/// Mean over classes present in ground truth or prediction of
/// cm[c][c] / (row_c + col_c - cm[c][c]). Classes absent from both are
/// excluded. Throws when no class is present at all.
double part_miou(const ConfusionMatrix& cm);

/// Per-category mean and population standard deviation over per-seed mIoU
/// runs, plus an overall row. Categories with no runs are omitted (with a
/// warning on stderr). Columns: category,n_runs,mean_miou,std_miou.
std::string report_csv(
    const std::map<std::string, std::vector<double>>& category_runs);

}  // namespace mvseg
