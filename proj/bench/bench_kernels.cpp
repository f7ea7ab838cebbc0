// Kernel benchmark: serial reference vs OpenMP versions, plus a full forward
// pass. Build and run:
//   cmake --build build && ./build/bench/bench_kernels [repeats]

#include "aft/harness.hpp"
#include "aft/model.hpp"
#include "aft/rng.hpp"
#include "aft/spectral.hpp"
#include "aft/tensor.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

aft::Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
    aft::GaussianStream stream(seed);
    aft::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = stream.next();
    }
    return t;
}

double time_ms(const std::function<void()>& fn, int repeats) {
    fn(); // warm up
    const auto start = Clock::now();
    for (int r = 0; r < repeats; ++r) {
        fn();
    }
    const auto stop = Clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

void row(const std::string& name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name.c_str(), serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

} // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    {
        aft::Tensor a = random_tensor({512, 512}, 1);
        aft::Tensor b = random_tensor({512, 512}, 2);
        row("matmul 512x512x512",
            time_ms([&] { aft::ref::matmul(a, b); }, repeats),
            time_ms([&] { aft::matmul(a, b); }, repeats));
    }
    {
        aft::Tensor x = random_tensor({16, 64, 64}, 3);
        aft::Tensor k = random_tensor({32, 16, 3, 3}, 4);
        aft::Tensor bias = random_tensor({32}, 5);
        row("conv2d 16->32 ch, 64x64",
            time_ms([&] { aft::ref::conv2d_circular(x, k, bias); }, repeats),
            time_ms([&] { aft::conv2d_circular(x, k, bias); }, repeats));
    }
    {
        aft::Tensor m = random_tensor({4096, 256}, 6);
        row("softmax_rows 4096x256",
            time_ms([&] { aft::ref::softmax_rows(m); }, repeats),
            time_ms([&] { aft::softmax_rows(m); }, repeats));
    }
    {
        // FFT has no in-repo serial twin; compare 1 thread vs all threads
        aft::Tensor x = random_tensor({32, 128, 128}, 7);
#ifdef _OPENMP
        const int max_threads = omp_get_max_threads();
        omp_set_num_threads(1);
        const double serial = time_ms([&] { aft::spectral::fft2(x); }, repeats);
        omp_set_num_threads(max_threads);
#else
        const double serial = time_ms([&] { aft::spectral::fft2(x); }, repeats);
#endif
        row("fft2 32ch 128x128", serial, time_ms([&] { aft::spectral::fft2(x); }, repeats));
    }
    {
        aft::model::ModelConfig config;
        config.activation = aft::layers::ActivationSpec::poly_gelu_deg2();
        const aft::model::ModelWeights weights = aft::model::init_weights(config, 0);
        const aft::Tensor img = aft::harness::synth_image(0, config.image_size, config.in_channels, 0.2);
#ifdef _OPENMP
        const int max_threads = omp_get_max_threads();
        omp_set_num_threads(1);
        const double serial = time_ms([&] { aft::model::forward(img, config, weights); }, repeats);
        omp_set_num_threads(max_threads);
#else
        const double serial = time_ms([&] { aft::model::forward(img, config, weights); }, repeats);
#endif
        row("forward aft-poly 64px", serial,
            time_ms([&] { aft::model::forward(img, config, weights); }, repeats));
    }
    return 0;
}
