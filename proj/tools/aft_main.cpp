// Command-line front end: selftest, probe, consistency, adversarial,
// init, info. Exit codes: 0 success, 1 assertion/evaluation failure,
// 2 usage error.

#include "aft/harness.hpp"
#include "aft/model.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

namespace {

struct CommonOpts {
    std::string config_path;
    std::string weights_path;
    std::string out_path;
    std::uint64_t seed = 0;
    std::size_t images = 8;
    std::size_t radius = 6;
    std::size_t trials = 5;
    std::string variant;
    std::string activation;
    std::string grid = "half";
    std::string shift = "cyclic_frac";
    double bilinear_divisor = 6.0;
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON model config");
    cmd->add_option("--weights", opts.weights_path, "weight file base path (<base>.json + <base>.bin)");
    cmd->add_option("--seed", opts.seed, "base seed for images, weights and shift draws");
    cmd->add_option("--images", opts.images, "number of synthetic images");
    cmd->add_option("--out", opts.out_path, "report path (.json for JSON, CSV otherwise)");
    cmd->add_option("--variant", opts.variant, "aft | baseline_vit | aps_vit");
    cmd->add_option("--activation", opts.activation, "gelu | poly");
    cmd->add_option("--grid", opts.grid, "integer | half");
    cmd->add_option("--radius", opts.radius, "grid radius s");
    cmd->add_option("--trials", opts.trials, "random shifts per image (consistency)");
    cmd->add_option("--shift", opts.shift, "cyclic_int | cyclic_frac | crop | bilinear");
    cmd->add_option("--bilinear-divisor", opts.bilinear_divisor,
                    "grid offsets are divided by this for bilinear shifts");
}

aft::model::ModelConfig resolve_config(const CommonOpts& opts) {
    aft::model::ModelConfig config;
    if (!opts.config_path.empty()) {
        config = aft::model::config_from_file(opts.config_path);
    }
    if (!opts.variant.empty()) {
        config.variant = aft::model::variant_from_string(opts.variant);
    }
    if (!opts.activation.empty()) {
        if (opts.activation == "gelu") {
            config.activation = aft::layers::ActivationSpec::gelu_default();
        } else if (opts.activation == "poly") {
            config.activation = aft::layers::ActivationSpec::poly_gelu_deg2();
        } else {
            throw CLI::ValidationError("--activation", "want gelu or poly");
        }
    }
    aft::model::validate_config(config);
    return config;
}

aft::model::ModelWeights resolve_weights(const CommonOpts& opts,
                                         const aft::model::ModelConfig& config) {
    if (!opts.weights_path.empty()) {
        auto [file_config, weights] = aft::model::load_weights(opts.weights_path);
        aft::model::validate_weights(config, weights);
        return weights;
    }
    return aft::model::init_weights(config, opts.seed);
}

aft::harness::GridSpec resolve_grid(const CommonOpts& opts) {
    if (opts.grid == "integer") {
        return {aft::harness::GridKind::integer, opts.radius};
    }
    if (opts.grid == "half") {
        return {aft::harness::GridKind::half, opts.radius};
    }
    throw CLI::ValidationError("--grid", "want integer or half");
}

std::size_t shift_margin(aft::harness::ShiftKind kind, const CommonOpts& opts) {
    using aft::harness::ShiftKind;
    if (kind == ShiftKind::crop) {
        return opts.radius;
    }
    if (kind == ShiftKind::bilinear) {
        const double max_off = static_cast<double>(opts.radius) / opts.bilinear_divisor;
        return static_cast<std::size_t>(std::ceil(std::max(max_off, 1.0)));
    }
    return 0;
}

void write_output(const CommonOpts& opts, const std::string& body) {
    if (opts.out_path.empty()) {
        std::cout << body;
        return;
    }
    std::ofstream out(opts.out_path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + opts.out_path + "'");
    }
    out << body;
    std::cout << "wrote " << opts.out_path << "\n";
}

bool wants_json(const CommonOpts& opts) {
    return opts.out_path.size() >= 5 &&
           opts.out_path.compare(opts.out_path.size() - 5, 5, ".json") == 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"alias-free vision transformer toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;

    CLI::App* selftest_cmd = app.add_subcommand("selftest", "run the oracle suites");
    CLI::App* probe_cmd = app.add_subcommand("probe", "per-layer equivariance probe, CSV out");
    CLI::App* consistency_cmd =
        app.add_subcommand("consistency", "prediction stability under random shifts");
    CLI::App* adversarial_cmd =
        app.add_subcommand("adversarial", "worst-case stability over a shift grid");
    CLI::App* init_cmd = app.add_subcommand("init", "write a deterministic weight file");
    CLI::App* info_cmd = app.add_subcommand("info", "print the resolved config");

    for (CLI::App* cmd : {selftest_cmd, probe_cmd, consistency_cmd, adversarial_cmd, init_cmd, info_cmd}) {
        add_common_flags(cmd, opts);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (selftest_cmd->parsed()) {
            return aft::harness::selftest(std::cout) == 0 ? 0 : 1;
        }

        const aft::model::ModelConfig config = resolve_config(opts);

        if (info_cmd->parsed()) {
            std::cout << aft::model::config_to_json(config) << "\n";
            return 0;
        }
        if (init_cmd->parsed()) {
            if (opts.weights_path.empty()) {
                std::cerr << "init: --weights <base path> is required\n";
                return 2;
            }
            aft::model::save_weights(opts.weights_path, config,
                                     aft::model::init_weights(config, opts.seed));
            std::cout << "wrote " << opts.weights_path << ".json and " << opts.weights_path
                      << ".bin\n";
            return 0;
        }

        const aft::model::ModelWeights weights = resolve_weights(opts, config);

        if (probe_cmd->parsed()) {
            auto reports = aft::harness::run_probe(config, weights, opts.images, opts.seed, opts.radius);
            write_output(opts, aft::harness::probe_csv(reports));
            return 0;
        }

        const aft::harness::ShiftKind kind = aft::harness::shift_kind_from_string(opts.shift);
        const aft::harness::GridSpec grid = resolve_grid(opts);
        const auto images = aft::harness::make_eval_images(config, kind, opts.images, opts.seed,
                                                           shift_margin(kind, opts));

        aft::harness::ConsistencyReport report;
        if (consistency_cmd->parsed()) {
            report = aft::harness::consistency_eval(config, weights, images, kind, grid, opts.trials,
                                                    opts.seed, opts.bilinear_divisor);
        } else {
            report = aft::harness::adversarial_eval(config, weights, images, kind, grid,
                                                    opts.bilinear_divisor);
        }
        write_output(opts, wants_json(opts) ? aft::harness::consistency_json(report)
                                            : aft::harness::consistency_csv(report));
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
