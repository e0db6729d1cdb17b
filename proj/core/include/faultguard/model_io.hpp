#pragma once

#include <string>

#include "faultguard/layers.hpp"

namespace fg {

/// Writes the manifest (JSON) plus one raw little-endian f32 blob holding
/// every weight and bias. save_model then load_model is the identity on the
/// model, including bit-exact weights.
void save_model(const ModelGraph& model, const std::string& manifest_path,
                const std::string& blob_path);

/// Reads a manifest and resolves its blob references; offset/length overruns
/// and missing blobs are FormatErrors.
ModelGraph load_model(const std::string& manifest_path);

}  // namespace fg
