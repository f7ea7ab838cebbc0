#pragma once

#include "aft/model.hpp"
#include "aft/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace aft::harness {

// The four translation families the evaluators exercise. Cyclic kinds wrap
// around and have an exact operator on every internal grid; crop and bilinear
// act on a margined source and model camera-like motion.
enum class ShiftKind { cyclic_int, cyclic_frac, crop, bilinear };

std::string to_string(ShiftKind k);
ShiftKind shift_kind_from_string(const std::string& s);

struct ShiftSpec {
    ShiftKind kind = ShiftKind::cyclic_int;
    double dy = 0.0; // pixels at the resolution of the grid being shifted
    double dx = 0.0;
    std::size_t frac_denominator = 1; // cyclic_frac: dy, dx are multiples of 1/n
    std::size_t margin = 0;           // crop/bilinear: source border on each side
};

enum class GridKind { integer, half };

struct GridSpec {
    GridKind kind = GridKind::half;
    std::size_t radius = 6;
};

// All (2s+1)^2 offsets of the grid: (i, j) or (i/2, j/2), -s <= i, j <= s.
std::vector<std::pair<double, double>> enumerate_grid(const GridSpec& grid);

// Random Fourier coefficients strictly below the bandlimit (cycles/sample),
// conjugate-symmetrized, inverse-transformed, normalized to [0,1].
Tensor synth_image(std::uint64_t seed, std::size_t size, std::size_t channels, double bandlimit);

Tensor apply_shift(const Tensor& img, const ShiftSpec& spec);

struct LayerError {
    std::string layer;
    double rel_error;
};

struct EquivarianceReport {
    std::uint64_t image_seed = 0;
    ShiftSpec shift;
    std::vector<LayerError> layers; // per traced layer plus a final "logits" row
};

// Runs traced forwards on img and on the shifted img, aligns each reference
// snapshot by the shift scaled to that layer's grid, and reports
// ||f(shifted) - aligned f(x)|| / max(||f(x)||, 1e-12) per layer.
// Cyclic shift kinds only.
EquivarianceReport equivariance_probe(const model::ModelConfig& config,
                                      const model::ModelWeights& weights, const Tensor& img,
                                      std::uint64_t image_seed, const ShiftSpec& spec);

struct ShiftOutcome {
    double dy = 0.0;
    double dx = 0.0;
    std::size_t pred = 0;
    double rel_dev = 0.0;
    bool consistent = false;
};

struct ImageResult {
    std::uint64_t image_seed = 0;
    std::size_t base_pred = 0;
    std::vector<ShiftOutcome> shifts;
    bool worst_case_consistent = false;
    double max_dev = 0.0;
};

struct ConsistencyReport {
    std::string protocol; // states the label-free worst-case-consistency substitution
    std::vector<ImageResult> images;
    double consistency_fraction = 0.0;   // over all (image, shift) pairs
    double worst_case_fraction = 0.0;    // images stable under every shift
    double mean_dev = 0.0;
    double max_dev = 0.0;
};

struct EvalImage {
    std::uint64_t seed = 0;
    Tensor source; // model-sized for cyclic kinds, margined source otherwise
};

std::vector<EvalImage> make_eval_images(const model::ModelConfig& config, ShiftKind kind,
                                        std::size_t count, std::uint64_t first_seed,
                                        std::size_t margin, double bandlimit = 0.2);

// Prediction stability under one random draw from the grid family per trial.
ConsistencyReport consistency_eval(const model::ModelConfig& config,
                                   const model::ModelWeights& weights,
                                   const std::vector<EvalImage>& images, ShiftKind kind,
                                   const GridSpec& grid, std::size_t trials,
                                   std::uint64_t shift_seed, double bilinear_divisor = 6.0);

// Exhaustive worst case over the whole grid.
ConsistencyReport adversarial_eval(const model::ModelConfig& config,
                                   const model::ModelWeights& weights,
                                   const std::vector<EvalImage>& images, ShiftKind kind,
                                   const GridSpec& grid, double bilinear_divisor = 6.0);

// probe driver shared by the CLI and the acceptance suite: one random
// (m/4, m'/4) cyclic shift per image seed
std::vector<EquivarianceReport> run_probe(const model::ModelConfig& config,
                                          const model::ModelWeights& weights, std::size_t count,
                                          std::uint64_t first_seed, std::size_t radius);

std::string probe_csv(const std::vector<EquivarianceReport>& reports);
std::string consistency_csv(const ConsistencyReport& report);
std::string consistency_json(const ConsistencyReport& report);

// Condensed oracle suites; prints one line per suite, returns failure count.
int selftest(std::ostream& out);

} // namespace aft::harness
