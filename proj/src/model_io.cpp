#include "aft/model.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aft::model {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) {
            c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        }
        table[i] = c;
    }
    return table;
}

json activation_to_json(const layers::ActivationSpec& spec) {
    json j;
    j["kind"] = spec.kind == layers::ActKind::gelu ? "gelu" : "poly";
    j["coefficients"] = spec.coefficients;
    j["up_factor"] = spec.up_factor;
    return j;
}

layers::ActivationSpec activation_from_json(const json& j) {
    layers::ActivationSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gelu") {
        spec.kind = layers::ActKind::gelu;
    } else if (kind == "poly") {
        spec.kind = layers::ActKind::poly;
    } else {
        throw std::invalid_argument("config: unknown activation kind '" + kind + "'");
    }
    if (j.contains("coefficients")) {
        spec.coefficients = j.at("coefficients").get<std::vector<double>>();
    }
    spec.up_factor = j.value("up_factor", spec.kind == layers::ActKind::gelu ? 2 : 2);
    layers::validate_spec(spec);
    return spec;
}

json config_to_json_obj(const ModelConfig& c) {
    json j;
    j["format_version"] = kFormatVersion;
    j["image_size"] = c.image_size;
    j["in_channels"] = c.in_channels;
    j["patch_size"] = c.patch_size;
    j["dim"] = c.dim;
    j["depth"] = c.depth;
    j["heads"] = c.heads;
    j["ca_depth"] = c.ca_depth;
    j["num_classes"] = c.num_classes;
    j["activation"] = activation_to_json(c.activation);
    j["head_kind"] = to_string(c.head_kind);
    j["variant"] = to_string(c.variant);
    return j;
}

ModelConfig config_from_json_obj(const json& j) {
    if (j.value("format_version", kFormatVersion) != kFormatVersion) {
        throw std::runtime_error("config: unknown format_version " +
                                 std::to_string(j.value("format_version", -1)));
    }
    ModelConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.dim = j.value("dim", c.dim);
    c.depth = j.value("depth", c.depth);
    c.heads = j.value("heads", c.heads);
    c.ca_depth = j.value("ca_depth", c.ca_depth);
    c.num_classes = j.value("num_classes", c.num_classes);
    if (j.contains("activation")) {
        c.activation = activation_from_json(j.at("activation"));
    }
    if (j.contains("head_kind")) {
        c.head_kind = head_kind_from_string(j.at("head_kind").get<std::string>());
    }
    if (j.contains("variant")) {
        c.variant = variant_from_string(j.at("variant").get<std::string>());
    }
    validate_config(c);
    return c;
}

void write_f64_le(std::string& out, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
        out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
}

double read_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    }
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

} // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
    static const auto table = make_crc_table();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) {
        c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    }
    return c ^ 0xFFFFFFFFu;
}

std::string config_to_json(const ModelConfig& c) { return config_to_json_obj(c).dump(2); }

ModelConfig config_from_json(const std::string& text) {
    return config_from_json_obj(json::parse(text));
}

ModelConfig config_from_file(const std::string& path) { return config_from_json(read_file(path)); }

void save_weights(const std::string& base_path, const ModelConfig& c, const ModelWeights& w) {
    validate_weights(c, w);
    std::string blob;
    json tensors = json::array();
    std::size_t offset = 0;
    for (const auto& [path, t] : w) { // std::map: sorted path order
        json entry;
        entry["path"] = path;
        entry["shape"] = t.shape();
        entry["dtype"] = "f64";
        entry["byte_offset"] = offset;
        entry["byte_len"] = t.size() * 8;
        tensors.push_back(entry);
        for (std::size_t i = 0; i < t.size(); ++i) {
            write_f64_le(blob, t[i]);
        }
        offset += t.size() * 8;
    }
    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["config"] = config_to_json_obj(c);
    manifest["tensors"] = tensors;
    manifest["blob_crc32"] = crc32(reinterpret_cast<const unsigned char*>(blob.data()), blob.size());
    write_file(base_path + ".json", manifest.dump(2) + "\n");
    write_file(base_path + ".bin", blob);
}

std::pair<ModelConfig, ModelWeights> load_weights(const std::string& base_path) {
    const json manifest = json::parse(read_file(base_path + ".json"));
    if (manifest.value("format_version", -1) != kFormatVersion) {
        throw std::runtime_error("weights: unknown format_version " +
                                 std::to_string(manifest.value("format_version", -1)));
    }
    ModelConfig config = config_from_json_obj(manifest.at("config"));
    const std::string blob = read_file(base_path + ".bin");

    std::size_t total = 0;
    for (const auto& entry : manifest.at("tensors")) {
        total += entry.at("byte_len").get<std::size_t>();
    }
    if (total != blob.size()) {
        throw std::runtime_error("weights: blob has " + std::to_string(blob.size()) +
                                 " bytes, manifest expects " + std::to_string(total));
    }
    const std::uint32_t want_crc = manifest.at("blob_crc32").get<std::uint32_t>();
    const std::uint32_t got_crc =
        crc32(reinterpret_cast<const unsigned char*>(blob.data()), blob.size());
    if (want_crc != got_crc) {
        throw std::runtime_error("weights: blob checksum mismatch (manifest " +
                                 std::to_string(want_crc) + ", blob " + std::to_string(got_crc) + ")");
    }

    ModelWeights weights;
    for (const auto& entry : manifest.at("tensors")) {
        const std::string path = entry.at("path").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        const std::size_t offset = entry.at("byte_offset").get<std::size_t>();
        const std::size_t len = entry.at("byte_len").get<std::size_t>();
        std::size_t count = 1;
        for (std::size_t e : shape) {
            count *= e;
        }
        if (len != count * 8 || offset + len > blob.size()) {
            throw std::runtime_error("weights: tensor '" + path + "' byte range [" +
                                     std::to_string(offset) + ", " + std::to_string(offset + len) +
                                     ") disagrees with shape " + shape_str(shape));
        }
        Tensor t(shape);
        const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
        for (std::size_t i = 0; i < count; ++i) {
            t[i] = read_f64_le(p + i * 8);
        }
        weights.emplace(path, std::move(t));
    }
    validate_weights(config, weights);
    return {std::move(config), std::move(weights)};
}

} // namespace aft::model
