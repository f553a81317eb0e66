// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#include "mvseg/evalkit.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <stdexcept>

namespace mvseg {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  if (o.n_classes != n_classes)
    throw std::runtime_error("confusion matrix: class count mismatch");
  for (size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
  return *this;
}

void accumulate(ConfusionMatrix& cm, const FaceLabels& gt,
                const FaceLabels& pred, const TriMesh& mesh) {
  size_t n = mesh.triangles.size();
  if (gt.labels.size() != n || pred.labels.size() != n)
    throw std::runtime_error("accumulate: label/mesh length mismatch");
  for (size_t t = 0; t < n; ++t) {
    int32_t g = gt.labels[t], p = pred.labels[t];
    if (g == kUnlabeled || p == kUnlabeled) continue;
    if (g >= cm.n_classes || p >= cm.n_classes)
      throw std::runtime_error("accumulate: label outside matrix at triangle " +
                               std::to_string(t));
    cm.at(g, p) += mesh.triangle_area(int(t));
  }
}

double part_miou(const ConfusionMatrix& cm) {
  int n = cm.n_classes;
  double total = 0.0;
  int present = 0;
  for (int c = 0; c < n; ++c) {
    double row = 0.0, col = 0.0;
    for (int k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    if (row == 0.0 && col == 0.0) continue;  // absent from gt and pred
    total += cm.at(c, c) / (row + col - cm.at(c, c));
    ++present;
  }
  if (present == 0)
    throw std::runtime_error("part_miou: no class present in the matrix");
  return total / present;
}

std::string report_csv(
    const std::map<std::string, std::vector<double>>& category_runs) {
  auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / double(v.size()));  // population
  };

  std::string out = "category,n_runs,mean_miou,std_miou\n";
  char buf[128];
  std::vector<double> all;
  for (const auto& [cat, runs] : category_runs) {
    if (runs.empty()) {
      std::cerr << "warning: category '" << cat << "' has no runs, omitted\n";
      continue;
    }
    double mean, sd;
    stats(runs, mean, sd);
    std::snprintf(buf, sizeof buf, "%s,%zu,%.9g,%.9g\n", cat.c_str(),
                  runs.size(), mean, sd);
    out += buf;
    all.insert(all.end(), runs.begin(), runs.end());
  }
  if (!all.empty()) {
    double mean, sd;
    stats(all, mean, sd);
    std::snprintf(buf, sizeof buf, "overall,%zu,%.9g,%.9g\n", all.size(), mean,
                  sd);
    out += buf;
  }
  return out;
}

}  // namespace mvseg
