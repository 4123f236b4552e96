#include "ivfg/checkpoint.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ivfg/errors.hpp"

namespace ivfg {

namespace fs = std::filesystem;

namespace {

fs::path manifest_path(const fs::path& stem) { return fs::path(stem.string() + ".manifest"); }
fs::path blob_path(const fs::path& stem) { return fs::path(stem.string() + ".f32"); }

std::string shape_string(const std::vector<int>& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

std::vector<int> parse_shape(const std::string& text) {
  std::vector<int> shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      shape.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw CheckpointError("bad shape '" + text + "'");
    }
  }
  if (shape.empty()) throw CheckpointError("empty shape");
  return shape;
}

std::size_t to_size(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw CheckpointError("bad " + what + " '" + text + "'");
  }
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> encode_f32(std::span<const double> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFFu));
  }
  return out;
}

std::string parameter_checksum(std::span<const double> values) { return sha256_hex(encode_f32(values)); }

void round_to_f32(std::span<double> values) {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

void save_checkpoint(const fs::path& stem, const Checkpoint& ckpt) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  const auto blob = encode_f32(ckpt.values);
  {
    std::ofstream out(blob_path(stem), std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw CheckpointError("cannot write " + blob_path(stem).string());
  }
  std::ofstream out(manifest_path(stem), std::ios::trunc);
  out << "format=ivfg-checkpoint-v1\n";
  out << "model=" << ckpt.model << "\n";
  out << "blob=" << blob_path(stem).filename().string() << "\n";
  out << "count=" << ckpt.values.size() << "\n";
  out << "sha256=" << sha256_hex(blob) << "\n";
  for (const auto& [key, value] : ckpt.config) out << "config." << key << "=" << value << "\n";
  for (const auto& p : ckpt.params) out << "param." << p.name << "=" << shape_string(p.shape) << "@" << p.offset << "\n";
  if (!out) throw CheckpointError("cannot write " + manifest_path(stem).string());
}

Checkpoint load_checkpoint(const fs::path& stem) {
  std::ifstream in(manifest_path(stem));
  if (!in) throw MissingArtifactError("missing checkpoint manifest " + manifest_path(stem).string());
  Checkpoint ckpt;
  std::string line;
  std::string sha;
  std::size_t count = 0;
  bool have_count = false;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed manifest line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "format") {
      if (value != "ivfg-checkpoint-v1") throw CheckpointError("unsupported checkpoint format " + value);
      have_format = true;
    } else if (key == "model") {
      ckpt.model = value;
    } else if (key == "blob") {
      // Blob name is implied by the stem; recorded for humans.
    } else if (key == "count") {
      count = to_size(value, "count");
      have_count = true;
    } else if (key == "sha256") {
      sha = value;
    } else if (key.rfind("config.", 0) == 0) {
      ckpt.config[key.substr(7)] = value;
    } else if (key.rfind("param.", 0) == 0) {
      const auto at = value.find('@');
      if (at == std::string::npos) throw CheckpointError("param line without offset: '" + line + "'");
      nn::ParamSpec spec;
      spec.name = key.substr(6);
      spec.shape = parse_shape(value.substr(0, at));
      spec.offset = to_size(value.substr(at + 1), "offset");
      spec.size = 1;
      for (int d : spec.shape) {
        if (d <= 0) throw CheckpointError("non-positive dimension in " + spec.name);
        spec.size *= static_cast<std::size_t>(d);
      }
      ckpt.params.push_back(std::move(spec));
    } else {
      throw CheckpointError("unknown manifest key '" + key + "'");
    }
  }
  if (!have_format || !have_count) throw CheckpointError("manifest missing format or count");

  std::size_t expected = 0;
  for (const auto& p : ckpt.params) {
    if (p.offset != expected) throw CheckpointError("parameter " + p.name + " has inconsistent offset");
    expected += p.size;
  }
  if (expected != count) throw CheckpointError("parameter table covers " + std::to_string(expected) +
                                               " values, manifest count is " + std::to_string(count));

  std::ifstream blob_in(blob_path(stem), std::ios::binary);
  if (!blob_in) throw MissingArtifactError("missing checkpoint blob " + blob_path(stem).string());
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(blob_in)), std::istreambuf_iterator<char>());
  if (blob.size() != count * 4) throw CheckpointError("blob size does not match manifest count");
  if (sha256_hex(blob) != sha) throw CheckpointError("blob checksum mismatch for " + stem.string());

  ckpt.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(blob[4 * i + b]) << (8 * b);
    ckpt.values[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return ckpt;
}

void assign_parameters(const Checkpoint& ckpt, nn::Network& net, std::size_t value_offset) {
  const auto& specs = net.param_specs();
  for (const auto& want : specs) {
    auto it = std::find_if(ckpt.params.begin(), ckpt.params.end(),
                           [&](const nn::ParamSpec& p) { return p.name == want.name; });
    if (it == ckpt.params.end()) throw CheckpointError("checkpoint lacks parameter " + want.name);
    if (it->shape != want.shape) {
      throw CheckpointError("parameter " + want.name + " has shape " + shape_string(it->shape) + ", expected " +
                            shape_string(want.shape));
    }
    if (it->offset != want.offset + value_offset) throw CheckpointError("parameter " + want.name + " misplaced");
  }
  auto dst = net.parameters();
  if (value_offset + dst.size() > ckpt.values.size()) throw CheckpointError("checkpoint too short");
  std::copy_n(ckpt.values.begin() + static_cast<std::ptrdiff_t>(value_offset), dst.size(), dst.begin());
}

bool checkpoint_exists(const fs::path& stem) {
  return fs::exists(manifest_path(stem)) && fs::exists(blob_path(stem));
}

}  // namespace ivfg
