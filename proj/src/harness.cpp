#include "aft/harness.hpp"

#include "aft/attention.hpp"
#include "aft/layers.hpp"
#include "aft/rng.hpp"
#include "aft/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace aft::harness {

namespace {

const char* kProtocolNote =
    "worst-case consistency (prediction stability over the shift set) stands in for "
    "labeled adversarial accuracy; no labels exist at this scale";

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

long long checked_integer(double v, const char* what) {
    const double r = std::llround(v);
    if (std::abs(v - r) > 1e-9) {
        throw std::invalid_argument(std::string("apply_shift: ") + what + " must be integral, got " +
                                    std::to_string(v));
    }
    return static_cast<long long>(r);
}

std::size_t argmax(const Tensor& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

double logit_rel_dev(const Tensor& logits, const Tensor& base) {
    return norm2(sub(logits, base)) / std::max(norm2(base), 1e-12);
}

Tensor center_crop(const Tensor& src, std::size_t out_h, std::size_t out_w) {
    const std::size_t oy = (src.extent(1) - out_h) / 2;
    const std::size_t ox = (src.extent(2) - out_w) / 2;
    Tensor out({src.extent(0), out_h, out_w});
    for (std::size_t c = 0; c < src.extent(0); ++c) {
        for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
                out(c, y, x) = src(c, oy + y, ox + x);
            }
        }
    }
    return out;
}

// model input for the zero offset of the family
Tensor base_image(const Tensor& source, const ShiftSpec& spec) {
    if (spec.kind == ShiftKind::cyclic_int || spec.kind == ShiftKind::cyclic_frac) {
        return source;
    }
    ShiftSpec zero = spec;
    zero.dy = 0.0;
    zero.dx = 0.0;
    return apply_shift(source, zero);
}

ShiftSpec grid_point_spec(ShiftKind kind, const GridSpec& grid, double dy, double dx,
                          std::size_t margin, double bilinear_divisor) {
    ShiftSpec spec;
    spec.kind = kind;
    spec.margin = margin;
    switch (kind) {
        case ShiftKind::cyclic_int:
        case ShiftKind::crop:
            if (grid.kind == GridKind::half) {
                throw std::invalid_argument("half-pixel grid needs a fractional shift kind");
            }
            spec.dy = dy;
            spec.dx = dx;
            break;
        case ShiftKind::cyclic_frac:
            spec.frac_denominator = grid.kind == GridKind::half ? 2 : 1;
            spec.dy = dy;
            spec.dx = dx;
            break;
        case ShiftKind::bilinear:
            spec.dy = dy / bilinear_divisor;
            spec.dx = dx / bilinear_divisor;
            break;
    }
    return spec;
}

ConsistencyReport evaluate_shift_sets(const model::ModelConfig& config,
                                      const model::ModelWeights& weights,
                                      const std::vector<EvalImage>& images,
                                      const std::vector<std::vector<ShiftSpec>>& shift_sets) {
    if (images.empty()) {
        throw std::invalid_argument("evaluation needs at least one image");
    }
    model::validate_weights(config, weights);

    ConsistencyReport report;
    report.protocol = kProtocolNote;
    report.images.resize(images.size());

    // flatten (image, shift) work items; each slot is independent
    struct Item {
        std::size_t image;
        std::size_t shift;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < images.size(); ++i) {
        report.images[i].image_seed = images[i].seed;
        report.images[i].shifts.resize(shift_sets[i].size());
        for (std::size_t s = 0; s < shift_sets[i].size(); ++s) {
            items.push_back({i, s});
        }
    }

    std::vector<Tensor> base_logits(images.size());
    const long long n_images = static_cast<long long>(images.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n_images; ++i) {
        const auto& img = images[static_cast<std::size_t>(i)];
        base_logits[static_cast<std::size_t>(i)] =
            model::forward(base_image(img.source, shift_sets[static_cast<std::size_t>(i)].empty()
                                                      ? ShiftSpec{}
                                                      : shift_sets[static_cast<std::size_t>(i)][0]),
                           config, weights);
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        report.images[i].base_pred = argmax(base_logits[i]);
    }

    const long long n_items = static_cast<long long>(items.size());
#pragma omp parallel for schedule(dynamic)
    for (long long it = 0; it < n_items; ++it) {
        const Item item = items[static_cast<std::size_t>(it)];
        const ShiftSpec& spec = shift_sets[item.image][item.shift];
        Tensor logits = model::forward(apply_shift(images[item.image].source, spec), config, weights);
        ShiftOutcome& out = report.images[item.image].shifts[item.shift];
        out.dy = spec.dy;
        out.dx = spec.dx;
        out.pred = argmax(logits);
        out.rel_dev = logit_rel_dev(logits, base_logits[item.image]);
        out.consistent = out.pred == report.images[item.image].base_pred;
    }

    std::size_t n_pairs = 0;
    std::size_t n_consistent = 0;
    std::size_t n_worst = 0;
    double dev_sum = 0.0;
    for (auto& img : report.images) {
        img.worst_case_consistent = true;
        img.max_dev = 0.0;
        for (const auto& s : img.shifts) {
            ++n_pairs;
            n_consistent += s.consistent ? 1 : 0;
            img.worst_case_consistent = img.worst_case_consistent && s.consistent;
            img.max_dev = std::max(img.max_dev, s.rel_dev);
            dev_sum += s.rel_dev;
            report.max_dev = std::max(report.max_dev, s.rel_dev);
        }
        n_worst += img.worst_case_consistent ? 1 : 0;
    }
    report.consistency_fraction =
        n_pairs == 0 ? 1.0 : static_cast<double>(n_consistent) / static_cast<double>(n_pairs);
    report.worst_case_fraction =
        static_cast<double>(n_worst) / static_cast<double>(report.images.size());
    report.mean_dev = n_pairs == 0 ? 0.0 : dev_sum / static_cast<double>(n_pairs);
    return report;
}

} // namespace

std::string to_string(ShiftKind k) {
    switch (k) {
        case ShiftKind::cyclic_int: return "cyclic_int";
        case ShiftKind::cyclic_frac: return "cyclic_frac";
        case ShiftKind::crop: return "crop";
        default: return "bilinear";
    }
}

ShiftKind shift_kind_from_string(const std::string& s) {
    if (s == "cyclic_int") return ShiftKind::cyclic_int;
    if (s == "cyclic_frac") return ShiftKind::cyclic_frac;
    if (s == "crop") return ShiftKind::crop;
    if (s == "bilinear") return ShiftKind::bilinear;
    throw std::invalid_argument("unknown shift kind '" + s + "'");
}

std::vector<std::pair<double, double>> enumerate_grid(const GridSpec& grid) {
    const long long s = static_cast<long long>(grid.radius);
    const double unit = grid.kind == GridKind::half ? 0.5 : 1.0;
    std::vector<std::pair<double, double>> points;
    points.reserve(static_cast<std::size_t>((2 * s + 1) * (2 * s + 1)));
    for (long long i = -s; i <= s; ++i) {
        for (long long j = -s; j <= s; ++j) {
            points.emplace_back(static_cast<double>(i) * unit, static_cast<double>(j) * unit);
        }
    }
    return points;
}

Tensor synth_image(std::uint64_t seed, std::size_t size, std::size_t channels, double bandlimit) {
    if (!(bandlimit > 0.0) || bandlimit > 0.25) {
        throw std::invalid_argument("synth_image: bandlimit must be in (0, 0.25], got " +
                                    std::to_string(bandlimit));
    }
    if (!spectral::is_power_of_two(size)) {
        throw std::invalid_argument("synth_image: size must be a power of two");
    }
    GaussianStream stream(seed);
    ComplexTensor spec({channels, size, size});
    auto in_band = [&](std::size_t u) {
        const long long su = u <= size / 2 ? static_cast<long long>(u)
                                           : static_cast<long long>(u) - static_cast<long long>(size);
        return std::abs(static_cast<double>(su)) / static_cast<double>(size) < bandlimit;
    };
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t u = 0; u < size; ++u) {
            for (std::size_t v = 0; v < size; ++v) {
                if (in_band(u) && in_band(v)) {
                    spec.re(c, u, v) = stream.next();
                    spec.im(c, u, v) = stream.next();
                }
            }
        }
    }
    // conjugate-symmetrize: S'[u,v] = (S[u,v] + conj(S[-u,-v])) / 2
    ComplexTensor sym({channels, size, size});
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t u = 0; u < size; ++u) {
            const std::size_t mu = (size - u) % size;
            for (std::size_t v = 0; v < size; ++v) {
                const std::size_t mv = (size - v) % size;
                sym.re(c, u, v) = 0.5 * (spec.re(c, u, v) + spec.re(c, mu, mv));
                sym.im(c, u, v) = 0.5 * (spec.im(c, u, v) - spec.im(c, mu, mv));
            }
        }
    }
    Tensor img = spectral::ifft2(sym);
    double lo = img[0];
    double hi = img[0];
    for (std::size_t i = 0; i < img.size(); ++i) {
        lo = std::min(lo, img[i]);
        hi = std::max(hi, img[i]);
    }
    if (hi - lo < 1e-12) {
        return Tensor::full(img.shape(), 0.5);
    }
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < img.size(); ++i) {
        img.buffer()[i] = (img[i] - lo) * inv;
    }
    return img;
}

Tensor apply_shift(const Tensor& img, const ShiftSpec& spec) {
    if (img.rank() != 3) {
        throw std::invalid_argument("apply_shift: want [CxHxW], got " + shape_str(img.shape()));
    }
    switch (spec.kind) {
        case ShiftKind::cyclic_int: {
            const long long ky = checked_integer(spec.dy, "cyclic_int dy");
            const long long kx = checked_integer(spec.dx, "cyclic_int dx");
            return spectral::cyclic_roll(img, ky, kx);
        }
        case ShiftKind::cyclic_frac: {
            const std::size_t n = spec.frac_denominator;
            const long long my = checked_integer(spec.dy * static_cast<double>(n), "cyclic_frac dy*n");
            const long long mx = checked_integer(spec.dx * static_cast<double>(n), "cyclic_frac dx*n");
            return spectral::fractional_shift_by_upsampling(img, my, mx, n);
        }
        case ShiftKind::crop: {
            const long long ky = checked_integer(spec.dy, "crop dy");
            const long long kx = checked_integer(spec.dx, "crop dx");
            const long long m = static_cast<long long>(spec.margin);
            if (std::abs(ky) > m || std::abs(kx) > m) {
                throw std::invalid_argument("apply_shift: crop offset exceeds margin " +
                                            std::to_string(spec.margin));
            }
            if (img.extent(1) <= 2 * spec.margin || img.extent(2) <= 2 * spec.margin) {
                throw std::invalid_argument("apply_shift: source too small for margin " +
                                            std::to_string(spec.margin));
            }
            const std::size_t oh = img.extent(1) - 2 * spec.margin;
            const std::size_t ow = img.extent(2) - 2 * spec.margin;
            Tensor out({img.extent(0), oh, ow});
            for (std::size_t c = 0; c < img.extent(0); ++c) {
                for (std::size_t y = 0; y < oh; ++y) {
                    for (std::size_t x = 0; x < ow; ++x) {
                        out(c, y, x) = img(c, static_cast<std::size_t>(m + ky) + y,
                                           static_cast<std::size_t>(m + kx) + x);
                    }
                }
            }
            return out;
        }
        case ShiftKind::bilinear:
        default: {
            if (spec.margin == 0) {
                throw std::invalid_argument("apply_shift: bilinear needs a source margin >= 1");
            }
            const double m = static_cast<double>(spec.margin);
            if (std::abs(spec.dy) > m || std::abs(spec.dx) > m) {
                throw std::invalid_argument("apply_shift: bilinear offset exceeds margin " +
                                            std::to_string(spec.margin));
            }
            const std::size_t oh = img.extent(1) - 2 * spec.margin;
            const std::size_t ow = img.extent(2) - 2 * spec.margin;
            Tensor out({img.extent(0), oh, ow});
            for (std::size_t c = 0; c < img.extent(0); ++c) {
                for (std::size_t y = 0; y < oh; ++y) {
                    const double py = static_cast<double>(y) + m + spec.dy;
                    const std::size_t y0 = static_cast<std::size_t>(std::floor(py));
                    const double wy = py - std::floor(py);
                    const std::size_t y1 = std::min(y0 + 1, img.extent(1) - 1);
                    for (std::size_t x = 0; x < ow; ++x) {
                        const double px = static_cast<double>(x) + m + spec.dx;
                        const std::size_t x0 = static_cast<std::size_t>(std::floor(px));
                        const double wx = px - std::floor(px);
                        const std::size_t x1 = std::min(x0 + 1, img.extent(2) - 1);
                        out(c, y, x) = (1.0 - wy) * (1.0 - wx) * img(c, y0, x0) +
                                       (1.0 - wy) * wx * img(c, y0, x1) +
                                       wy * (1.0 - wx) * img(c, y1, x0) + wy * wx * img(c, y1, x1);
                    }
                }
            }
            return out;
        }
    }
}

EquivarianceReport equivariance_probe(const model::ModelConfig& config,
                                      const model::ModelWeights& weights, const Tensor& img,
                                      std::uint64_t image_seed, const ShiftSpec& spec) {
    if (spec.kind != ShiftKind::cyclic_int && spec.kind != ShiftKind::cyclic_frac) {
        throw std::invalid_argument("equivariance_probe: only cyclic shift kinds have a "
                                    "well-defined operator on internal grids");
    }
    model::ForwardTrace base_trace;
    model::forward(img, config, weights, &base_trace);
    model::ForwardTrace shifted_trace;
    model::forward(apply_shift(img, spec), config, weights, &shifted_trace);

    EquivarianceReport report;
    report.image_seed = image_seed;
    report.shift = spec;
    for (std::size_t i = 0; i < base_trace.entries.size(); ++i) {
        const auto& ref = base_trace.entries[i];
        const auto& got = shifted_trace.entries[i];
        const double gy = static_cast<double>(img.extent(1)) / static_cast<double>(ref.snapshot.ht);
        const double gx = static_cast<double>(img.extent(2)) / static_cast<double>(ref.snapshot.wt);
        attention::TokenMap aligned =
            attention::shift_token_map(ref.snapshot, {spec.dy / gy, spec.dx / gx});
        report.layers.push_back(
            {ref.name, rel_error(got.snapshot.tokens, aligned.tokens)});
    }
    report.layers.push_back({"logits", rel_error(shifted_trace.logits, base_trace.logits)});
    return report;
}

std::vector<EvalImage> make_eval_images(const model::ModelConfig& config, ShiftKind kind,
                                        std::size_t count, std::uint64_t first_seed,
                                        std::size_t margin, double bandlimit) {
    std::vector<EvalImage> images;
    images.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t seed = first_seed + i;
        if (kind == ShiftKind::cyclic_int || kind == ShiftKind::cyclic_frac) {
            images.push_back({seed, synth_image(seed, config.image_size, config.in_channels, bandlimit)});
        } else {
            const std::size_t want = config.image_size + 2 * margin;
            std::size_t synth_size = config.image_size;
            while (synth_size < want) {
                synth_size *= 2;
            }
            Tensor big = synth_image(seed, synth_size, config.in_channels, bandlimit);
            images.push_back({seed, center_crop(big, want, want)});
        }
    }
    return images;
}

ConsistencyReport consistency_eval(const model::ModelConfig& config,
                                   const model::ModelWeights& weights,
                                   const std::vector<EvalImage>& images, ShiftKind kind,
                                   const GridSpec& grid, std::size_t trials,
                                   std::uint64_t shift_seed, double bilinear_divisor) {
    if (trials == 0) {
        throw std::invalid_argument("consistency_eval: trials must be >= 1");
    }
    if (images.empty()) {
        throw std::invalid_argument("consistency_eval: empty image set");
    }
    const std::size_t margin = images[0].source.extent(1) >= config.image_size
                                   ? (images[0].source.extent(1) - config.image_size) / 2
                                   : 0;
    // draw all shifts up front, serially, so the report is independent of the
    // parallel schedule
    SplitMix64 rng(shift_seed * 0x9E3779B97F4A7C15ULL + 1);
    const long long span = 2 * static_cast<long long>(grid.radius) + 1;
    std::vector<std::vector<ShiftSpec>> shift_sets(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        for (std::size_t t = 0; t < trials; ++t) {
            const long long iy =
                static_cast<long long>(rng.next_u64() % static_cast<std::uint64_t>(span)) -
                static_cast<long long>(grid.radius);
            const long long ix =
                static_cast<long long>(rng.next_u64() % static_cast<std::uint64_t>(span)) -
                static_cast<long long>(grid.radius);
            const double unit = grid.kind == GridKind::half ? 0.5 : 1.0;
            shift_sets[i].push_back(grid_point_spec(kind, grid, static_cast<double>(iy) * unit,
                                                    static_cast<double>(ix) * unit, margin,
                                                    bilinear_divisor));
        }
    }
    return evaluate_shift_sets(config, weights, images, shift_sets);
}

ConsistencyReport adversarial_eval(const model::ModelConfig& config,
                                   const model::ModelWeights& weights,
                                   const std::vector<EvalImage>& images, ShiftKind kind,
                                   const GridSpec& grid, double bilinear_divisor) {
    if (images.empty()) {
        throw std::invalid_argument("adversarial_eval: empty image set");
    }
    const std::size_t margin = images[0].source.extent(1) >= config.image_size
                                   ? (images[0].source.extent(1) - config.image_size) / 2
                                   : 0;
    auto points = enumerate_grid(grid);
    std::vector<std::vector<ShiftSpec>> shift_sets(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        shift_sets[i].reserve(points.size());
        for (const auto& [dy, dx] : points) {
            shift_sets[i].push_back(grid_point_spec(kind, grid, dy, dx, margin, bilinear_divisor));
        }
    }
    return evaluate_shift_sets(config, weights, images, shift_sets);
}

std::vector<EquivarianceReport> run_probe(const model::ModelConfig& config,
                                          const model::ModelWeights& weights, std::size_t count,
                                          std::uint64_t first_seed, std::size_t radius) {
    SplitMix64 rng(first_seed * 0x9E3779B97F4A7C15ULL + 17);
    const long long span = 4 * static_cast<long long>(std::max<std::size_t>(radius, 1)) + 1;
    std::vector<EquivarianceReport> reports(count);
    std::vector<ShiftSpec> specs(count);
    for (std::size_t i = 0; i < count; ++i) {
        ShiftSpec spec;
        spec.kind = ShiftKind::cyclic_frac;
        spec.frac_denominator = 4;
        const long long my = static_cast<long long>(rng.next_u64() % static_cast<std::uint64_t>(span)) -
                             span / 2;
        const long long mx = static_cast<long long>(rng.next_u64() % static_cast<std::uint64_t>(span)) -
                             span / 2;
        spec.dy = static_cast<double>(my) / 4.0;
        spec.dx = static_cast<double>(mx) / 4.0;
        specs[i] = spec;
    }
    const long long n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n; ++i) {
        const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(i);
        Tensor img = synth_image(seed, config.image_size, config.in_channels, 0.2);
        reports[static_cast<std::size_t>(i)] =
            equivariance_probe(config, weights, img, seed, specs[static_cast<std::size_t>(i)]);
    }
    return reports;
}

std::string probe_csv(const std::vector<EquivarianceReport>& reports) {
    std::string out = "# format_version=1\nimage_seed,shift_dy,shift_dx,kind,layer,rel_error\n";
    for (const auto& r : reports) {
        for (const auto& l : r.layers) {
            out += std::to_string(r.image_seed) + "," + fmt_double(r.shift.dy) + "," +
                   fmt_double(r.shift.dx) + "," + to_string(r.shift.kind) + "," + l.layer + "," +
                   fmt_double(l.rel_error) + "\n";
        }
    }
    return out;
}

std::string consistency_csv(const ConsistencyReport& report) {
    std::string out = "# format_version=1\n# note: " + report.protocol + "\n";
    out += "image_seed,base_pred,consistent,max_dev\n";
    for (const auto& img : report.images) {
        out += std::to_string(img.image_seed) + "," + std::to_string(img.base_pred) + "," +
               (img.worst_case_consistent ? "1" : "0") + "," + fmt_double(img.max_dev) + "\n";
    }
    out += "# consistency_fraction=" + fmt_double(report.consistency_fraction) +
           " worst_case_fraction=" + fmt_double(report.worst_case_fraction) +
           " mean_dev=" + fmt_double(report.mean_dev) + " max_dev=" + fmt_double(report.max_dev) +
           "\n";
    return out;
}

// ---------------------------------------------------------------------------
// selftest: condensed oracle suites
// ---------------------------------------------------------------------------

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double sigma = 1.0) {
    GaussianStream stream(seed);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = sigma * stream.next();
    }
    return t;
}

attention::AttentionParams random_attention(std::size_t d, std::size_t heads, std::uint64_t seed,
                                            double sigma) {
    attention::AttentionParams p;
    p.w_q = random_tensor({d, d}, seed + 1, sigma);
    p.w_k = random_tensor({d, d}, seed + 2, sigma);
    p.w_v = random_tensor({d, d}, seed + 3, sigma);
    p.w_proj = random_tensor({d, d}, seed + 4, sigma);
    p.proj_bias = random_tensor({d}, seed + 5, sigma);
    p.temperature = Tensor::full({heads}, 1.0);
    p.heads = heads;
    return p;
}

attention::TokenMap random_token_map(std::size_t ht, std::size_t wt, std::size_t d,
                                     std::uint64_t seed, double bandlimit = 0.2) {
    Tensor chw = synth_image(seed, ht, d, bandlimit); // square grids here
    (void)wt;
    return attention::token_map_from_chw(chw);
}

struct SelfTest {
    std::ostream& out;
    int failures = 0;

    void check(const std::string& name, bool ok) {
        out << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        failures += ok ? 0 : 1;
    }
};

} // namespace

int selftest(std::ostream& out) {
    SelfTest t{out};

    // FFT against the brute-force oracle
    {
        bool ok = true;
        for (std::size_t h : {1u, 2u, 4u, 8u}) {
            for (std::size_t w : {1u, 2u, 4u, 8u}) {
                Tensor x = random_tensor({2, h, w}, 1000 + h * 16 + w);
                ComplexTensor fast = spectral::fft2(x);
                ComplexTensor slow = spectral::dft2(x);
                for (std::size_t i = 0; i < fast.size(); ++i) {
                    const double dr = std::abs(fast.re()[i] - slow.re()[i]);
                    const double di = std::abs(fast.im()[i] - slow.im()[i]);
                    ok = ok && dr <= 1e-10 * std::max(1.0, std::abs(slow.re()[i])) &&
                         di <= 1e-10 * std::max(1.0, std::abs(slow.im()[i]));
                }
            }
        }
        t.check("fft2 matches dft2 oracle", ok);
    }
    {
        Tensor x = random_tensor({1, 8, 8}, 42);
        t.check("ifft2(fft2(x)) round trip", rel_error(spectral::ifft2(spectral::fft2(x)), x) < 1e-10);
    }

    // shift-operator algebra on bandlimited signals
    {
        bool group_ok = true;
        bool parseval_ok = true;
        bool commute_ok = true;
        for (std::uint64_t s = 0; s < 8; ++s) {
            Tensor x = synth_image(100 + s, 16, 1, 0.2);
            const spectral::ShiftVector d1{0.3 + 0.1 * static_cast<double>(s), -0.7};
            const spectral::ShiftVector d2{-1.2, 0.45};
            Tensor lhs = spectral::cyclic_shift_fractional(spectral::cyclic_shift_fractional(x, d2), d1);
            Tensor rhs = spectral::cyclic_shift_fractional(x, {d1.dy + d2.dy, d1.dx + d2.dx});
            group_ok = group_ok && rel_error(lhs, rhs) < 1e-9;

            Tensor y = synth_image(200 + s, 16, 1, 0.2);
            const double before = dot_flat(x, y);
            const double after = dot_flat(spectral::cyclic_shift_fractional(x, d1),
                                          spectral::cyclic_shift_fractional(y, d1));
            parseval_ok = parseval_ok && std::abs(after - before) <= 1e-9 * std::max(1.0, std::abs(before));

            Tensor down_shift = spectral::downsample_af(spectral::cyclic_shift_fractional(x, d1), 2);
            Tensor shift_down = spectral::cyclic_shift_fractional(spectral::downsample_af(x, 2),
                                                                  {d1.dy / 2.0, d1.dx / 2.0});
            commute_ok = commute_ok && rel_error(down_shift, shift_down) < 1e-9;
        }
        t.check("fractional shifts form a group action", group_ok);
        t.check("inner products survive fractional shifts", parseval_ok);
        t.check("downsampling commutes with shifts", commute_ok);
    }

    // m/n protocol equals the phase-ramp shift
    {
        bool ok = true;
        Tensor x = synth_image(7, 16, 2, 0.2);
        for (std::size_t n : {2u, 4u}) {
            for (long long m = -3; m <= 3; ++m) {
                Tensor via_up = spectral::fractional_shift_by_upsampling(x, m, -m, n);
                Tensor via_phase = spectral::cyclic_shift_fractional(
                    x, {static_cast<double>(m) / static_cast<double>(n),
                        static_cast<double>(-m) / static_cast<double>(n)});
                ok = ok && rel_error(via_up, via_phase) < 1e-10;
            }
        }
        t.check("m/n upsampled shifts equal phase shifts", ok);
    }

    // attention propositions at small size
    {
        const std::size_t d = 8;
        const std::size_t heads = 2;
        bool prop1 = true;
        bool prop2 = true;
        bool prop3 = true;
        bool ca_ok = true;
        for (std::uint64_t s = 0; s < 10; ++s) {
            attention::TokenMap x = random_token_map(4, 4, d, 300 + s);
            attention::AttentionParams p = random_attention(d, heads, 400 + s * 10, 0.5);
            const spectral::ShiftVector delta{0.25 + 0.5 * static_cast<double>(s % 3), -0.75};
            attention::TokenMap xs = attention::shift_token_map(x, delta);

            auto [q, k, v] = attention::project_qkv(x, p);
            auto [qs, ks, vs] = attention::project_qkv(xs, p);
            attention::TokenMap qmap{q, x.ht, x.wt};
            prop1 = prop1 && rel_error(qs, attention::shift_token_map(qmap, delta).tokens, 1e-12) < 1e-8;

            Tensor kv = matmul(transpose(k), v);
            Tensor kv_s = matmul(transpose(ks), vs);
            prop2 = prop2 && rel_error(kv_s, kv) < 1e-8;

            auto f = [](const Tensor& m) { return softmax_rows(m); };
            attention::TokenMap sea_x = attention::sea_apply(x, p, f);
            attention::TokenMap sea_xs = attention::sea_apply(xs, p, f);
            prop3 = prop3 &&
                    rel_error(sea_xs.tokens, attention::shift_token_map(sea_x, delta).tokens) < 1e-8;

            Tensor cls = random_tensor({d}, 500 + s, 0.5);
            auto [patch, cls_out] = attention::class_attention_apply(x, cls, p);
            auto [patch_s, cls_out_s] = attention::class_attention_apply(xs, cls, p);
            ca_ok = ca_ok && rel_error(cls_out_s, cls_out) < 1e-8 &&
                    rel_error(patch_s.tokens, attention::shift_token_map(patch, delta).tokens) < 1e-8;
        }
        t.check("Q, K, V shift with their input", prop1);
        t.check("K^T V is shift-invariant", prop2);
        t.check("softmax-free attention is shift-equivariant", prop3);
        t.check("class token is shift-invariant under class attention", ca_ok);
    }

    // alias-free layers
    {
        layers::NormParams norm{Tensor::full({8}, 1.0), Tensor({8}), 1e-6};
        attention::TokenMap x = random_token_map(8, 8, 8, 600);
        const spectral::ShiftVector delta{0.5, 1.25};
        attention::TokenMap lhs = layers::af_layernorm(attention::shift_token_map(x, delta), norm);
        attention::TokenMap rhs = attention::shift_token_map(layers::af_layernorm(x, norm), delta);
        t.check("alias-free layer norm is shift-equivariant",
                rel_error(lhs.tokens, rhs.tokens) < 1e-10);

        layers::ActivationSpec poly = layers::ActivationSpec::poly_gelu_deg2();
        Tensor img = synth_image(601, 16, 2, 0.2);
        Tensor a = layers::af_activation(spectral::cyclic_shift_fractional(img, delta), poly);
        Tensor b = spectral::cyclic_shift_fractional(layers::af_activation(img, poly), delta);
        t.check("polynomial activation is exactly equivariant", rel_error(a, b) < 1e-8);
    }

    // serialization
    {
        model::ModelConfig cfg;
        cfg.image_size = 16;
        cfg.patch_size = 4;
        cfg.dim = 16;
        cfg.depth = 1;
        cfg.heads = 2;
        cfg.ca_depth = 1;
        model::ModelWeights w = model::init_weights(cfg, 3);
        const std::string base = "/tmp/aft_selftest_weights";
        model::save_weights(base, cfg, w);
        auto [cfg2, w2] = model::load_weights(base);
        bool ok = w.size() == w2.size();
        for (const auto& [path, tensor] : w) {
            ok = ok && w2.count(path) == 1 && w2.at(path).buffer() == tensor.buffer();
        }
        t.check("weight save/load round trip is bit-exact", ok);
    }

    // parallel kernels vs serial reference
    {
        Tensor a = random_tensor({40, 24}, 700);
        Tensor b = random_tensor({24, 32}, 701);
        bool ok = matmul(a, b).buffer() == ref::matmul(a, b).buffer();
        Tensor x = random_tensor({3, 16, 16}, 702);
        Tensor kern = random_tensor({5, 3, 3, 3}, 703);
        Tensor bias = random_tensor({5}, 704);
        ok = ok && conv2d_circular(x, kern, bias).buffer() == ref::conv2d_circular(x, kern, bias).buffer();
        Tensor rows = random_tensor({70, 9}, 705);
        ok = ok && softmax_rows(rows).buffer() == ref::softmax_rows(rows).buffer();
        t.check("parallel kernels match the serial reference bitwise", ok);
    }

    out << (t.failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
    return t.failures;
}

std::string consistency_json(const ConsistencyReport& report) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["protocol"] = report.protocol;
    j["consistency_fraction"] = report.consistency_fraction;
    j["worst_case_fraction"] = report.worst_case_fraction;
    j["mean_dev"] = report.mean_dev;
    j["max_dev"] = report.max_dev;
    nlohmann::json images = nlohmann::json::array();
    for (const auto& img : report.images) {
        nlohmann::json ji;
        ji["image_seed"] = img.image_seed;
        ji["base_pred"] = img.base_pred;
        ji["worst_case_consistent"] = img.worst_case_consistent;
        ji["max_dev"] = img.max_dev;
        nlohmann::json shifts = nlohmann::json::array();
        for (const auto& s : img.shifts) {
            shifts.push_back({{"dy", s.dy}, {"dx", s.dx}, {"pred", s.pred},
                              {"rel_dev", s.rel_dev}, {"consistent", s.consistent}});
        }
        ji["shifts"] = shifts;
        images.push_back(ji);
    }
    j["images"] = images;
    return j.dump(2) + "\n";
}

} // namespace aft::harness
