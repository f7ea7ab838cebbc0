#pragma once

#include "aft/attention.hpp"
#include "aft/layers.hpp"
#include "aft/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace aft::model {

enum class HeadKind { afca, avgpool };
enum class Variant { aft, baseline_vit, aps_vit };

std::string to_string(HeadKind k);
std::string to_string(Variant v);
HeadKind head_kind_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

struct ModelConfig {
    std::size_t image_size = 64;
    std::size_t in_channels = 3;
    std::size_t patch_size = 16;
    std::size_t dim = 128;
    std::size_t depth = 2;
    std::size_t heads = 4;
    std::size_t ca_depth = 2;
    std::size_t num_classes = 10;
    layers::ActivationSpec activation = layers::ActivationSpec::gelu_default();
    HeadKind head_kind = HeadKind::afca;
    Variant variant = Variant::aft;
};

void validate_config(const ModelConfig& c);

// Activation used inside the patch embedding: degree-3 fit for poly configs
// (the embedding keeps its own, wider nonlinearity), GELU otherwise.
layers::ActivationSpec pe_activation(const ModelConfig& c);

// Named parameter set. std::map keeps the sorted-path enumeration order that
// initialization and serialization both rely on.
using ModelWeights = std::map<std::string, Tensor>;

struct ParamInfo {
    enum class Init { normal, zeros, ones };
    std::vector<std::size_t> shape;
    Init init = Init::normal;
};

std::map<std::string, ParamInfo> parameter_manifest(const ModelConfig& c);

// SplitMix64 -> Box-Muller normals scaled by 0.02 for weight tensors; biases
// zero, norm scales one, temperatures one. Only normal-init tensors consume
// the stream, in sorted path order.
ModelWeights init_weights(const ModelConfig& c, std::uint64_t seed);

void validate_weights(const ModelConfig& c, const ModelWeights& w);

struct TraceEntry {
    std::string name;
    attention::TokenMap snapshot;
};

struct ForwardTrace {
    std::vector<TraceEntry> entries;
    Tensor logits;
};

// Full forward pass; fills *trace with per-layer token-map snapshots when
// given. Returns the class logits.
Tensor forward(const Tensor& img, const ModelConfig& c, const ModelWeights& w,
               ForwardTrace* trace = nullptr);

// --- serialization (model_io.cpp) ---------------------------------------

// Weight file is a pair: "<base>.json" manifest (format_version, config echo,
// tensor table with byte ranges, crc32 of the blob) and "<base>.bin", the
// little-endian f64 payload in manifest order. Round trips are bit-exact.
void save_weights(const std::string& base_path, const ModelConfig& c, const ModelWeights& w);
std::pair<ModelConfig, ModelWeights> load_weights(const std::string& base_path);

std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const std::string& text);
ModelConfig config_from_file(const std::string& path);

std::uint32_t crc32(const unsigned char* data, std::size_t len);

} // namespace aft::model
