#include "faultguard/model_io.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "faultguard/errors.hpp"

namespace fg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Weights are serialized as raw IEEE-754-32 little-endian words. On the
// (little-endian) platforms we target this is a plain byte copy.
void append_blob(std::ofstream& blob, const Tensor& t, json& ref, const std::string& blob_name,
                 int64_t& offset) {
  ref["blob"] = blob_name;
  ref["offset"] = offset;
  ref["count"] = t.numel();
  blob.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  offset += t.numel() * static_cast<int64_t>(sizeof(float));
}

Tensor read_blob(const fs::path& blob_path, int64_t offset, int64_t count,
                 std::vector<int64_t> shape) {
  std::ifstream f(blob_path, std::ios::binary);
  if (!f)
    throw FormatError("manifest references missing blob: " + blob_path.string());
  f.seekg(0, std::ios::end);
  const int64_t size = static_cast<int64_t>(f.tellg());
  if (offset < 0 || count < 0 || offset + count * static_cast<int64_t>(sizeof(float)) > size)
    throw FormatError("blob reference [offset " + std::to_string(offset) + ", count " +
                      std::to_string(count) + "] overruns " + blob_path.string() + " (" +
                      std::to_string(size) + " bytes)");
  Tensor t = Tensor::zeros(std::move(shape));
  if (t.numel() != count)
    throw FormatError("blob count " + std::to_string(count) + " does not match shape " +
                      shape_str(t.shape));
  f.seekg(offset);
  f.read(reinterpret_cast<char*>(t.data.data()),
         static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!f) throw FormatError("short read from blob: " + blob_path.string());
  return t;
}

}  // namespace

void save_model(const ModelGraph& model, const std::string& manifest_path,
                const std::string& blob_path) {
  model.validate();
  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob) throw FormatError("cannot write blob: " + blob_path);
  const std::string blob_name = fs::path(blob_path).filename().string();

  json manifest;
  manifest["name"] = model.name;
  manifest["input_shape"] = model.input_shape;
  json layers = json::array();
  int64_t offset = 0;
  for (const auto& layer : model.layers) {
    json jl;
    jl["kind"] = layer_kind_name(layer.kind);
    switch (layer.kind) {
      case LayerKind::Conv2D:
        jl["in_channels"] = layer.in_channels;
        jl["out_channels"] = layer.out_channels;
        jl["kernel"] = layer.kernel;
        jl["stride"] = layer.stride;
        break;
      case LayerKind::MaxPool2D:
        jl["kernel"] = layer.kernel;
        jl["stride"] = layer.stride;
        break;
      case LayerKind::FullyConnected:
        jl["in_features"] = layer.in_features;
        jl["out_features"] = layer.out_features;
        break;
      default:
        break;
    }
    if (layer.has_params()) {
      append_blob(blob, layer.weight, jl["weight"], blob_name, offset);
      append_blob(blob, layer.bias, jl["bias"], blob_name, offset);
    }
    layers.push_back(std::move(jl));
  }
  manifest["layers"] = std::move(layers);

  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) throw FormatError("cannot write manifest: " + manifest_path);
  mf << manifest.dump(2) << "\n";
}

ModelGraph load_model(const std::string& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw FormatError("cannot open manifest: " + manifest_path);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::parse_error& e) {
    throw FormatError("manifest parse error in " + manifest_path + ": " + e.what());
  }

  const fs::path base = fs::path(manifest_path).parent_path();
  ModelGraph model;
  try {
    model.name = manifest.at("name").get<std::string>();
    model.input_shape = manifest.at("input_shape").get<std::vector<int64_t>>();
    for (const auto& jl : manifest.at("layers")) {
      const LayerKind kind = layer_kind_from_name(jl.at("kind").get<std::string>());
      LayerSpec layer;
      switch (kind) {
        case LayerKind::Conv2D:
          layer = LayerSpec::conv2d(jl.at("in_channels").get<int64_t>(),
                                    jl.at("out_channels").get<int64_t>(),
                                    jl.at("kernel").get<int64_t>(),
                                    jl.at("stride").get<int64_t>());
          break;
        case LayerKind::MaxPool2D:
          layer = LayerSpec::maxpool2d(jl.at("kernel").get<int64_t>(),
                                       jl.at("stride").get<int64_t>());
          break;
        case LayerKind::ReLU:
          layer = LayerSpec::relu();
          break;
        case LayerKind::Flatten:
          layer = LayerSpec::flatten();
          break;
        case LayerKind::FullyConnected:
          layer = LayerSpec::fully_connected(jl.at("in_features").get<int64_t>(),
                                             jl.at("out_features").get<int64_t>());
          break;
        case LayerKind::Softmax:
          layer = LayerSpec::softmax();
          break;
      }
      if (layer.has_params()) {
        const auto& jw = jl.at("weight");
        const auto& jb = jl.at("bias");
        layer.weight = read_blob(base / jw.at("blob").get<std::string>(),
                                 jw.at("offset").get<int64_t>(), jw.at("count").get<int64_t>(),
                                 layer.weight.shape);
        layer.bias = read_blob(base / jb.at("blob").get<std::string>(),
                               jb.at("offset").get<int64_t>(), jb.at("count").get<int64_t>(),
                               layer.bias.shape);
      }
      model.layers.push_back(std::move(layer));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest " + manifest_path + ": " + e.what());
  }
  model.validate();
  return model;
}

}  // namespace fg
