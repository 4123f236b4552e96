#include "ivfg/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "ivfg/errors.hpp"

namespace ivfg {

namespace fs = std::filesystem;

void validate_image(const Image& image) {
  if (image.shape.height != image.shape.width) throw DataError("image is not square: " + nn::to_string(image.shape));
  if (image.shape.channels != 1 && image.shape.channels != 3) throw DataError("image must have 1 or 3 channels");
  for (double v : image.data) {
    if (!(v >= -1.0 && v <= 1.0)) throw DataError("image value outside [-1, 1]");
  }
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (double& v : out.data) {
    const double level = std::clamp(std::round((v + 1.0) * 127.5), 0.0, 255.0);
    v = level / 127.5 - 1.0;
  }
  return out;
}

void write_png(const fs::path& path, const Image& image) {
  validate_image(image);
  const int size = image.shape.width;
  const int channels = image.shape.channels;
  std::vector<png_byte> pixels(static_cast<std::size_t>(size) * size * channels);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < channels; ++c) {
        const double level = std::clamp(std::round((image.at(c, y, x) + 1.0) * 127.5), 0.0, 255.0);
        pixels[(static_cast<std::size_t>(y) * size + x) * channels + c] = static_cast<png_byte>(level);
      }
    }
  }
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(size);
  desc.height = static_cast<png_uint_32>(size);
  desc.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!png_image_write_to_file(&desc, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw DataError("cannot write " + path.string() + ": " + desc.message);
  }
}

Image read_png(const fs::path& path) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.c_str())) {
    throw DataError("cannot read " + path.string() + ": " + desc.message);
  }
  const bool gray = (desc.format & PNG_FORMAT_FLAG_COLOR) == 0;
  desc.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int channels = gray ? 1 : 3;
  std::vector<png_byte> pixels(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, pixels.data(), 0, nullptr)) {
    throw DataError("cannot decode " + path.string() + ": " + desc.message);
  }
  if (desc.width != desc.height) throw DataError(path.string() + " is not square");
  const int size = static_cast<int>(desc.width);
  Image image(nn::Shape{channels, size, size});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < channels; ++c) {
        image.at(c, y, x) = pixels[(static_cast<std::size_t>(y) * size + x) * channels + c] / 127.5 - 1.0;
      }
    }
  }
  return image;
}

std::size_t IdentityDataset::image_count() const {
  std::size_t n = 0;
  for (const auto& id : identities) n += id.images.size();
  return n;
}

std::vector<std::string> IdentityDataset::labels() const {
  std::vector<std::string> out;
  out.reserve(identities.size());
  for (const auto& id : identities) out.push_back(id.label);
  return out;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct FaceParams {
  std::array<double, 3> background{};
  std::array<double, 3> skin{};
  std::array<double, 3> hair{};
  std::array<double, 3> eye{};
  std::array<double, 3> mouth{};
  double cx = 0.5, cy = 0.53, rx = 0.33, ry = 0.39;
  double hairline = 0.25;  // fraction of the face height covered by hair
  double eye_dx = 0.14, eye_y = 0.43, eye_size = 0.045;
  double nose_len = 0.08, nose_shade = 0.3;
  double mouth_y = 0.71, mouth_w = 0.1, mouth_h = 0.03;
};

FaceParams sample_identity(std::mt19937_64& rng) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  FaceParams p;
  for (int c = 0; c < 3; ++c) p.background[c] = u(0.0, 0.35);
  for (int c = 0; c < 3; ++c) p.skin[c] = u(0.35, 0.95);
  for (int c = 0; c < 3; ++c) p.hair[c] = u(0.0, 0.8);
  for (int c = 0; c < 3; ++c) p.eye[c] = u(0.0, 0.6);
  for (int c = 0; c < 3; ++c) p.mouth[c] = u(0.1, 0.9);
  p.cx = u(0.46, 0.54);
  p.cy = u(0.5, 0.56);
  p.rx = u(0.26, 0.38);
  p.ry = u(0.33, 0.44);
  p.hairline = u(0.1, 0.4);
  p.eye_dx = u(0.09, 0.18);
  p.eye_y = u(0.37, 0.48);
  p.eye_size = u(0.03, 0.065);
  p.nose_len = u(0.04, 0.12);
  p.nose_shade = u(0.1, 0.5);
  p.mouth_y = u(0.66, 0.77);
  p.mouth_w = u(0.05, 0.15);
  p.mouth_h = u(0.018, 0.04);
  return p;
}

Image render_face(const FaceParams& p, int size, double shift_x, double shift_y, double gain, double offset,
                  double noise, std::mt19937_64& rng) {
  Image img(nn::Shape{3, size, size});
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sharp = 10.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      // Normalized pixel-centre coordinates of the un-shifted face.
      const double u = (x + 0.5) / size - shift_x;
      const double v = (y + 0.5) / size - shift_y;
      const double fx = (u - p.cx) / p.rx;
      const double fy = (v - p.cy) / p.ry;
      const double face = sigmoid((1.0 - fx * fx - fy * fy) * sharp);
      const double top = p.cy - p.ry;
      const double hair_edge = top + p.hairline * 2.0 * p.ry;
      const double hx = (u - p.cx) / (p.rx * 1.12);
      const double hy = (v - p.cy) / (p.ry * 1.08);
      const double hair = sigmoid((hair_edge - v) * sharp * 12.0) * sigmoid((1.0 - hx * hx - hy * hy) * sharp);
      double eye = 0.0;
      for (double side : {-1.0, 1.0}) {
        const double ex = u - (p.cx + side * p.eye_dx);
        const double ey = v - p.eye_y;
        eye += std::exp(-(ex * ex + ey * ey) / (2.0 * p.eye_size * p.eye_size));
      }
      eye = std::min(1.0, eye) * face;
      const double nx = (u - p.cx) / 0.018;
      const double ny = (v - (p.eye_y + p.mouth_y) * 0.5) / p.nose_len;
      const double nose = std::exp(-0.5 * (nx * nx + ny * ny)) * face;
      const double mx = (u - p.cx) / p.mouth_w;
      const double my = (v - p.mouth_y) / p.mouth_h;
      const double mouth = std::exp(-0.5 * (mx * mx * mx * mx + my * my)) * face;
      for (int c = 0; c < 3; ++c) {
        double val = p.background[c];
        val += (p.skin[c] - val) * face;
        val *= 1.0 - p.nose_shade * nose;
        val += (p.hair[c] - val) * hair;
        val += (p.eye[c] - val) * eye;
        val += (p.mouth[c] - val) * mouth;
        val = val * gain + offset + noise * gauss(rng);
        img.at(c, y, x) = std::clamp(2.0 * val - 1.0, -1.0, 1.0);
      }
    }
  }
  return quantize_8bit(img);
}

std::string identity_label(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "id%03d", index);
  return buf;
}

}  // namespace

IdentityDataset synth_toy_dataset(const ToyDatasetSpec& spec) {
  if (spec.identity_count < 2) throw PreconditionError("toy dataset needs at least 2 identities");
  if (spec.images_per_identity < 2) throw PreconditionError("toy dataset needs at least 2 images per identity");
  if (spec.resolution < 8) throw PreconditionError("toy dataset resolution must be at least 8");
  if (spec.variation < 0.0) throw PreconditionError("variation must be non-negative");

  IdentityDataset ds;
  ds.resolution = spec.resolution;
  ds.channels = 3;
  std::mt19937_64 id_rng(spec.seed);
  for (int i = 0; i < spec.identity_count; ++i) {
    const FaceParams params = sample_identity(id_rng);
    // Per-identity stream so one identity's images do not depend on the count of others.
    std::mt19937_64 rng(spec.seed * 1000003ULL + static_cast<std::uint64_t>(i) * 7919ULL + 17ULL);
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    Identity identity{identity_label(i), {}};
    const double v = spec.variation;
    for (int j = 0; j < spec.images_per_identity; ++j) {
      FaceParams jittered = params;
      jittered.mouth_w *= 1.0 + u(-0.1, 0.1) * v;
      jittered.eye_size *= 1.0 + u(-0.1, 0.1) * v;
      const double shift = 1.5 / 32.0 * v;
      identity.images.push_back(render_face(jittered, spec.resolution, u(-shift, shift), u(-shift, shift),
                                            1.0 + u(-0.08, 0.08) * v, u(-0.04, 0.04) * v, 0.02 * v, rng));
    }
    ds.identities.push_back(std::move(identity));
  }
  return ds;
}

void save_dataset(const IdentityDataset& dataset, const fs::path& root) {
  for (const auto& identity : dataset.identities) {
    const fs::path dir = root / identity.label;
    fs::create_directories(dir);
    for (std::size_t j = 0; j < identity.images.size(); ++j) {
      char name[32];
      std::snprintf(name, sizeof name, "%03zu.png", j);
      write_png(dir / name, identity.images[j]);
    }
  }
}

IdentityDataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw MissingArtifactError("dataset root " + root.string() + " does not exist");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  if (dirs.empty()) throw DataError("dataset root " + root.string() + " has no identity directories");
  std::sort(dirs.begin(), dirs.end());

  IdentityDataset ds;
  for (const auto& dir : dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    }
    if (files.empty()) throw DataError("identity directory " + dir.string() + " is empty");
    std::sort(files.begin(), files.end());
    Identity identity{dir.filename().string(), {}};
    for (const auto& file : files) {
      Image img = read_png(file);
      if (ds.resolution == 0) {
        ds.resolution = img.shape.width;
        ds.channels = img.shape.channels;
      } else if (img.shape.width != ds.resolution || img.shape.channels != ds.channels) {
        throw DataError("mixed resolution: " + file.string() + " is " + nn::to_string(img.shape));
      }
      identity.images.push_back(std::move(img));
    }
    ds.identities.push_back(std::move(identity));
  }
  return ds;
}

std::array<std::size_t, 3> split_counts(std::size_t identities, const std::array<int, 3>& ratios) {
  for (int r : ratios) {
    if (r <= 0) throw PreconditionError("split ratios must be positive");
  }
  const double total = ratios[0] + ratios[1] + ratios[2];
  const double n = static_cast<double>(identities);
  const int smallest = *std::min_element(ratios.begin(), ratios.end());
  if (n * smallest / total < 1.0) {
    throw InsufficientDataError("too few identities (" + std::to_string(identities) + ") for the requested split");
  }
  const auto val = static_cast<std::size_t>(std::llround(n * ratios[1] / total));
  const auto test = static_cast<std::size_t>(std::llround(n * ratios[2] / total));
  if (val + test >= identities) throw InsufficientDataError("split leaves no training identities");
  return {identities - val - test, val, test};
}

DatasetSplit identity_split(const IdentityDataset& dataset, const std::array<int, 3>& ratios, std::uint64_t seed) {
  const auto counts = split_counts(dataset.identities.size(), ratios);
  std::vector<std::size_t> order(dataset.identities.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplit split;
  for (IdentityDataset* part : {&split.train, &split.val, &split.test}) {
    part->resolution = dataset.resolution;
    part->channels = dataset.channels;
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    IdentityDataset& part = i < counts[0] ? split.train : (i < counts[0] + counts[1] ? split.val : split.test);
    part.identities.push_back(dataset.identities[order[i]]);
  }
  // Keep each part in label order so downstream iteration is stable.
  for (IdentityDataset* part : {&split.train, &split.val, &split.test}) {
    std::sort(part->identities.begin(), part->identities.end(),
              [](const Identity& a, const Identity& b) { return a.label < b.label; });
  }
  return split;
}

}  // namespace ivfg
