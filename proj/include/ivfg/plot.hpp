#pragma once

// 2-D views of exported feature files: PCA projection and a PNG scatter.

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ivfg/evaluation.hpp"

namespace ivfg {

/// Rows projected onto the top `components` principal axes (n x components).
/// Axis signs are fixed so the largest-magnitude loading is positive.
Eigen::MatrixXd pca_project(std::span<const LabeledFeature> rows, int components = 2);

/// Scatter of 2-D points coloured by group (the label up to its first '+').
/// Labels without '+' are drawn as filled discs, others as hollow squares.
void render_scatter(const std::filesystem::path& path, const Eigen::MatrixXd& points,
                    std::span<const std::string> labels, int size = 512);

}  // namespace ivfg
