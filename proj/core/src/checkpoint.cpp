#include <zlib.h>

#include <array>
#include <bit>
#include <fstream>
#include <sstream>

#include "bas/nnet.hpp"
#include "json.hpp"

namespace bas::nnet {

namespace {

using Json = nlohmann::json;

void feed_crc(uLong& crc, std::span<const double> values) {
  std::array<unsigned char, 8> bytes{};
  for (double x : values) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  }
}

std::vector<double> read_doubles(const Json& node, const char* what) {
  if (!node.is_array()) {
    throw CheckpointError(CheckpointError::Kind::Invalid, std::string("checkpoint: ") + what +
                                                              " is not an array");
  }
  std::vector<double> out;
  out.reserve(node.size());
  for (const auto& v : node) {
    if (!v.is_number()) {
      throw CheckpointError(CheckpointError::Kind::Invalid,
                            std::string("checkpoint: non-numeric entry in ") + what);
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::uint32_t parameter_crc32(const MlpModel& model) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  for (const auto& layer : model.layers) {
    feed_crc(crc, layer.weight.values());
    feed_crc(crc, layer.bias.values());
  }
  return static_cast<std::uint32_t>(crc);
}

std::string serialize_checkpoint(const MlpModel& model) {
  model.validate();
  Json layers = Json::array();
  for (const auto& layer : model.layers) {
    if (!layer.weight.all_finite() || !layer.bias.all_finite()) {
      throw CheckpointError(CheckpointError::Kind::Invalid,
                            "checkpoint: refusing to save non-finite parameters");
    }
    layers.push_back({{"weight", std::vector<double>(layer.weight.values().begin(),
                                                     layer.weight.values().end())},
                      {"bias", std::vector<double>(layer.bias.values().begin(),
                                                   layer.bias.values().end())}});
  }
  Json doc = {
      {"format_version", kCheckpointFormatVersion},
      {"kind", model.features.kind},
      {"layer_dims", model.layer_dims},
      {"feature_config",
       {{"kind", model.features.kind},
        {"state_dim", model.features.state_dim},
        {"n_freq", model.features.n_freq}}},
      {"layers", std::move(layers)},
      {"crc32", parameter_crc32(model)},
  };
  return doc.dump(1) + "\n";
}

MlpModel parse_checkpoint(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw CheckpointError(CheckpointError::Kind::Parse,
                          std::string("checkpoint: parse error: ") + e.what());
  }

  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw CheckpointError(CheckpointError::Kind::Version,
                            "checkpoint: unsupported format_version " + std::to_string(version) +
                                " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    }

    MlpModel model;
    model.layer_dims = doc.at("layer_dims").get<std::vector<std::size_t>>();
    const Json& fc = doc.at("feature_config");
    model.features.kind = fc.at("kind").get<std::string>();
    model.features.state_dim = fc.at("state_dim").get<std::size_t>();
    model.features.n_freq = fc.at("n_freq").get<std::size_t>();

    const Json& layers = doc.at("layers");
    if (!layers.is_array() || layers.size() + 1 != model.layer_dims.size()) {
      throw CheckpointError(CheckpointError::Kind::Invalid,
                            "checkpoint: layer list inconsistent with layer_dims");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::size_t d_in = model.layer_dims[l];
      const std::size_t d_out = model.layer_dims[l + 1];
      auto w = read_doubles(layers[l].at("weight"), "weight");
      auto b = read_doubles(layers[l].at("bias"), "bias");
      if (w.size() != d_in * d_out || b.size() != d_out) {
        throw CheckpointError(CheckpointError::Kind::Invalid,
                              "checkpoint: layer " + std::to_string(l) + " has wrong size");
      }
      model.layers.push_back({TensorBuffer({d_out, d_in}, std::move(w)),
                              TensorBuffer({d_out}, std::move(b))});
    }

    const auto stored = doc.at("crc32").get<std::uint32_t>();
    if (stored != parameter_crc32(model)) {
      throw CheckpointError(CheckpointError::Kind::Checksum, "checkpoint: crc32 mismatch");
    }
    return model;
  } catch (const Json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Invalid,
                          std::string("checkpoint: malformed container: ") + e.what());
  }
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  const std::string text = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError(CheckpointError::Kind::MissingFile,
                          "checkpoint: cannot open " + path.string() + " for writing");
  }
  out << text;
  if (!out) {
    throw CheckpointError(CheckpointError::Kind::MissingFile,
                          "checkpoint: write failed for " + path.string());
  }
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(CheckpointError::Kind::MissingFile,
                          "checkpoint: cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_checkpoint(buffer.str());
}

}  // namespace bas::nnet
