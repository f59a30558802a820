// Benchmark: OpenMP conv2d kernels vs the serial reference implementation.
//
// The production path (im2col + accumulation, parallel over batch items and
// weight elements) and the serial quadruple-loop reference compute the same
// contraction from independently derived indexing, so this doubles as an
// agreement check: the run fails if they drift apart.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "ccnn/nn.hpp"
#include "ccnn/oracle.hpp"
#include "ccnn/pathway.hpp"
#include "ccnn/rng.hpp"

using namespace ccnn;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor4<double> rand_tensor(Dims4 d, Rng& rng) {
  Tensor4<double> t(d);
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

struct Shape {
  int64_t n, c, f, hw, k;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conv kernel benchmark: OpenMP path vs serial reference"};
  int64_t n = 32, c = 16, f = 16, hw = 16, k = 3;
  int reps = 5;
  bool quick = false;
  app.add_option("--n", n, "batch size");
  app.add_option("--c", c, "input channels");
  app.add_option("--f", f, "filters");
  app.add_option("--hw", hw, "spatial size");
  app.add_option("--k", k, "kernel size");
  app.add_option("--reps", reps, "repetitions per kernel");
  app.add_flag("--quick", quick, "tiny shapes for CI");
  CLI11_PARSE(app, argc, argv);

  std::vector<Shape> shapes;
  if (quick) {
    shapes = {{4, 4, 4, 8, 3}};
    reps = 2;
  } else {
    shapes = {{n, c, f, hw, k}, {n, 1, f, hw, k}, {n * 2, c, f / 2 > 0 ? f / 2 : 1, hw / 2, k}};
  }

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif

  bool ok = true;
  for (const auto& s : shapes) {
    Rng rng(99);
    const Tensor4<double> x = rand_tensor(Dims4{s.n, s.c, s.hw, s.hw}, rng);
    const Tensor4<double> w = rand_tensor(Dims4{s.f, s.c, s.k, s.k}, rng);
    std::vector<double> bias(static_cast<size_t>(s.f));
    for (auto& b : bias) b = rng.uniform(-0.5, 0.5);

    const double macs = 2.0 * static_cast<double>(s.n * s.f * s.c * s.k * s.k * s.hw * s.hw);

    auto t0 = std::chrono::steady_clock::now();
    Tensor4<double> y_omp;
    for (int r = 0; r < reps; ++r) y_omp = conv2d_forward(x, w, bias, Padding::Same);
    const double t_omp = seconds_since(t0) / reps;

    t0 = std::chrono::steady_clock::now();
    Tensor4<double> y_ref;
    for (int r = 0; r < reps; ++r) y_ref = oracle::naive_conv2d(x, w, bias, Padding::Same);
    const double t_ref = seconds_since(t0) / reps;

    double dev = 0.0;
    for (size_t i = 0; i < y_omp.data.size(); ++i)
      dev = std::max(dev, std::abs(y_omp.data[i] - y_ref.data[i]));

    // backward pass throughput (production path only; the reference has no
    // backward, finite differences play that role in the tests)
    const Tensor4<double> g = rand_tensor(y_omp.dims, rng);
    t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) (void)conv2d_backward(x, w, Padding::Same, g);
    const double t_bwd = seconds_since(t0) / reps;

    std::printf(
        "conv n=%lld c=%lld f=%lld hw=%lld k=%lld | omp %8.2f ms (%6.2f GFLOP/s) | serial %8.2f ms "
        "(%6.2f GFLOP/s) | speedup %4.2fx | bwd %8.2f ms | max|diff| %.2e\n",
        static_cast<long long>(s.n), static_cast<long long>(s.c), static_cast<long long>(s.f),
        static_cast<long long>(s.hw), static_cast<long long>(s.k), t_omp * 1e3, macs / t_omp / 1e9,
        t_ref * 1e3, macs / t_ref / 1e9, t_ref / t_omp, t_bwd * 1e3, dev);
    if (dev > 1e-12) {
      std::printf("FAIL: kernels disagree beyond 1e-12\n");
      ok = false;
    }
  }

  // pathway op throughput: slice and roll are the memory-bound block permutes
  {
    Rng rng(7);
    const int64_t nb = quick ? 8 : 64, ch = quick ? 4 : 16, sp = quick ? 8 : 16;
    const Tensor4<double> x = rand_tensor(Dims4{nb, ch, sp, sp}, rng);
    const PathwayBatch<double> pb(x, GroupKind::C4, 1);
    auto t0 = std::chrono::steady_clock::now();
    PathwayBatch<double> s = cyclic_slice(pb);
    for (int r = 1; r < reps; ++r) s = cyclic_slice(pb);
    const double t_slice = seconds_since(t0) / reps;
    t0 = std::chrono::steady_clock::now();
    PathwayBatch<double> rl = cyclic_roll(s);
    for (int r = 1; r < reps; ++r) rl = cyclic_roll(s);
    const double t_roll = seconds_since(t0) / reps;
    std::printf("slice %7.3f ms | roll %7.3f ms (batch %lld, %lldx%lldx%lld)\n", t_slice * 1e3,
                t_roll * 1e3, static_cast<long long>(nb), static_cast<long long>(ch),
                static_cast<long long>(sp), static_cast<long long>(sp));
  }

  std::printf(ok ? "agreement OK\n" : "agreement FAILED\n");
  return ok ? 0 : 1;
}
