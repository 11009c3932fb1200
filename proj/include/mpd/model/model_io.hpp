#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpd/model/weights.hpp"

namespace mpd {

// MPDW container: one UTF-8 JSON header line holding metadata plus an ordered
// tensor manifest {name, shape, offset}, a blank line, then little-endian
// float32 blobs in manifest order. Offsets are relative to the first blob byte.

struct TensorView {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<const float> values;
};

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> values;
};

struct TensorFile {
    nlohmann::json header;  // full header, including "tensors"
    std::vector<NamedTensor> tensors;
};

// `meta` must be a JSON object; "format", "version" and "tensors" are filled in.
std::string encode_tensor_file(nlohmann::json meta, std::span<const TensorView> tensors);
TensorFile decode_tensor_file(const std::string& bytes);

void write_tensor_file(const std::filesystem::path& path, nlohmann::json meta,
                       std::span<const TensorView> tensors);
TensorFile read_tensor_file(const std::filesystem::path& path);

std::string encode_model(const Model& model);
Model decode_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const Model& model);
// Throws LoadError (malformed header, dimension mismatch, non-finite weight).
Model load_model(const std::filesystem::path& path);

} // namespace mpd
