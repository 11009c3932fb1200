#include "mpd/model/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mpd/error.hpp"

namespace mpd {
namespace {

constexpr int kFormatVersion = 1;

void append_le(std::string& out, std::span<const float> values) {
    const std::size_t start = out.size();
    out.resize(start + values.size() * sizeof(float));
    char* dst = out.data() + start;
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(dst, values.data(), values.size() * sizeof(float));
    } else {
        for (float v : values) {
            const auto bits = std::bit_cast<std::uint32_t>(v);
            for (int b = 0; b < 4; ++b) *dst++ = static_cast<char>((bits >> (8 * b)) & 0xFF);
        }
    }
}

std::vector<float> read_le(const char* src, std::size_t count) {
    std::vector<float> out(count);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data(), src, count * sizeof(float));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b)
                bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[4 * i + b])) << (8 * b);
            out[i] = std::bit_cast<float>(bits);
        }
    }
    return out;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

} // namespace

std::string encode_tensor_file(nlohmann::json meta, std::span<const TensorView> tensors) {
    if (!meta.is_object()) meta = nlohmann::json::object();
    meta["format"] = "MPDW";
    meta["version"] = kFormatVersion;
    auto manifest = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& t : tensors) {
        manifest.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
        offset += t.values.size() * sizeof(float);
    }
    meta["tensors"] = std::move(manifest);

    std::string out = meta.dump();
    out += "\n\n";
    out.reserve(out.size() + offset);
    for (const auto& t : tensors) append_le(out, t.values);
    return out;
}

TensorFile decode_tensor_file(const std::string& bytes) {
    const auto newline = bytes.find('\n');
    if (newline == std::string::npos)
        throw LoadError("malformed header: no header line");
    if (newline + 1 >= bytes.size() || bytes[newline + 1] != '\n')
        throw LoadError("malformed header: missing blank line after header");

    TensorFile file;
    try {
        file.header = nlohmann::json::parse(bytes.substr(0, newline));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string{"malformed header: "} + e.what());
    }
    if (!file.header.is_object() || file.header.value("format", "") != "MPDW")
        throw LoadError("malformed header: not an MPDW file");
    if (file.header.value("version", 0) != kFormatVersion)
        throw LoadError("malformed header: unsupported version");
    if (!file.header.contains("tensors") || !file.header["tensors"].is_array())
        throw LoadError("malformed header: missing tensor manifest");

    const std::size_t blob_start = newline + 2;
    const std::size_t blob_size = bytes.size() - blob_start;
    for (const auto& entry : file.header["tensors"]) {
        NamedTensor t;
        std::size_t offset = 0;
        try {
            t.name = entry.at("name").get<std::string>();
            t.shape = entry.at("shape").get<std::vector<std::size_t>>();
            offset = entry.at("offset").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(std::string{"malformed header: bad manifest entry: "} + e.what());
        }
        const std::size_t count = element_count(t.shape);
        if (offset > blob_size || count * sizeof(float) > blob_size - offset)
            throw LoadError("malformed header: tensor '" + t.name + "' extends past end of file");
        t.values = read_le(bytes.data() + blob_start + offset, count);
        file.tensors.push_back(std::move(t));
    }
    return file;
}

void write_tensor_file(const std::filesystem::path& path, nlohmann::json meta,
                       std::span<const TensorView> tensors) {
    const std::string bytes = encode_tensor_file(std::move(meta), tensors);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_tensor_file(bytes);
}

std::string encode_model(const Model& model) {
    std::vector<TensorView> views;
    for_each_tensor(model.config, model.weights, [&](const TensorRef& t) {
        views.push_back({t.name, t.shape, {t.values.data(), t.values.size()}});
    });
    nlohmann::json meta = {{"kind", "model"}, {"config", config_to_json(model.config)}};
    return encode_tensor_file(std::move(meta), views);
}

Model decode_model(const std::string& bytes) {
    TensorFile file = decode_tensor_file(bytes);
    if (!file.header.contains("config")) throw LoadError("malformed header: missing config");

    Model model;
    try {
        model.config = config_from_json(file.header["config"]);
        model.config.validate();
    } catch (const ConfigError& e) {
        throw LoadError(std::string{"dimension mismatch: "} + e.what());
    }
    model.weights = allocate_weights(model.config);

    std::size_t index = 0;
    for_each_tensor(model.config, model.weights, [&](const TensorRef& t) {
        if (index >= file.tensors.size())
            throw LoadError("dimension mismatch: missing tensor '" + t.name + "'");
        const NamedTensor& stored = file.tensors[index++];
        if (stored.name != t.name)
            throw LoadError("malformed header: expected tensor '" + t.name + "', found '" +
                            stored.name + "'");
        if (stored.shape != t.shape)
            throw LoadError("dimension mismatch in tensor '" + t.name + "'");
        std::copy(stored.values.begin(), stored.values.end(), t.values.begin());
    });
    if (index != file.tensors.size()) throw LoadError("dimension mismatch: unexpected extra tensors");

    validate_weights(model.config, model.weights);
    return model;
}

void save_model(const std::filesystem::path& path, const Model& model) {
    validate_weights(model.config, model.weights);
    const std::string bytes = encode_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path.string());
    std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_model(bytes);
}

} // namespace mpd
