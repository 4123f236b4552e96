#include "ivfg/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "ivfg/data.hpp"
#include "ivfg/errors.hpp"

namespace ivfg {

Eigen::MatrixXd pca_project(std::span<const LabeledFeature> rows, int components) {
  if (rows.size() < 2) throw PreconditionError("PCA needs at least two rows");
  const Eigen::Index dim = rows.front().values.size();
  if (components < 1 || components > dim) throw PreconditionError("invalid PCA component count");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].values.size() != dim) throw DimensionError("feature rows have different dimensions");
    x.row(static_cast<Eigen::Index>(i)) = rows[i].values.transpose();
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(rows.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend; take the trailing columns in reverse.
  Eigen::MatrixXd axes(dim, components);
  for (int c = 0; c < components; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(dim - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    axes.col(c) = v;
  }
  return x * axes;
}

namespace {

constexpr std::array<std::array<double, 3>, 10> kPalette{{{0.12, 0.47, 0.71},
                                                          {1.00, 0.50, 0.05},
                                                          {0.17, 0.63, 0.17},
                                                          {0.84, 0.15, 0.16},
                                                          {0.58, 0.40, 0.74},
                                                          {0.55, 0.34, 0.29},
                                                          {0.89, 0.47, 0.76},
                                                          {0.50, 0.50, 0.50},
                                                          {0.74, 0.74, 0.13},
                                                          {0.09, 0.75, 0.81}}};

}  // namespace

void render_scatter(const std::filesystem::path& path, const Eigen::MatrixXd& points,
                    std::span<const std::string> labels, int size) {
  if (points.cols() != 2 || points.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw DimensionError("scatter needs one 2-D point per label");
  }
  Image canvas(nn::Shape{3, size, size}, 1.0);
  if (points.rows() == 0) {
    write_png(path, canvas);
    return;
  }
  const Eigen::Vector2d lo = points.colwise().minCoeff();
  const Eigen::Vector2d hi = points.colwise().maxCoeff();
  const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-12});
  const double margin = 0.08 * size;
  const double scale = (size - 2 * margin) / span;

  std::map<std::string, std::size_t> groups;
  for (const auto& label : labels) groups.emplace(label.substr(0, label.find('+')), 0);
  std::size_t next = 0;
  for (auto& [name, index] : groups) index = next++;

  auto plot = [&](int x, int y, const std::array<double, 3>& rgb) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    for (int c = 0; c < 3; ++c) canvas.at(c, y, x) = 2.0 * rgb[static_cast<std::size_t>(c)] - 1.0;
  };
  const int r = std::max(2, size / 128);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const std::string& label = labels[static_cast<std::size_t>(i)];
    const auto& rgb = kPalette[groups.at(label.substr(0, label.find('+'))) % kPalette.size()];
    const int cx = static_cast<int>(std::lround(margin + (points(i, 0) - lo[0]) * scale));
    const int cy = static_cast<int>(std::lround(size - margin - (points(i, 1) - lo[1]) * scale));
    const bool hollow = label.find('+') != std::string::npos;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (hollow) {
          if (std::abs(dx) == r || std::abs(dy) == r) plot(cx + dx, cy + dy, rgb);
        } else if (dx * dx + dy * dy <= r * r) {
          plot(cx + dx, cy + dy, rgb);
        }
      }
    }
  }
  write_png(path, canvas);
}

}  // namespace ivfg
