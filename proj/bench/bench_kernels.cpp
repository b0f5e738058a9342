// Serial vs OpenMP timings for the GEMM kernels and for panel forecasting,
// with a bitwise comparison of the outputs.
//
//   dssh_bench [--reps N] [--threads N]

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "dssh/forecast.hpp"
#include "dssh/kernels.hpp"
#include "dssh/model.hpp"
#include "dssh/rng.hpp"

using namespace dssh;

namespace {

template <typename F>
double best_ms(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (ms < best) best = ms;
  }
  return best;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void bench_gemm(int reps) {
  Rng rng(7);
  std::printf("%-8s %6s %6s %6s %12s %12s %8s %s\n", "kernel", "m", "k", "n", "serial ms", "parallel ms",
              "speedup", "bitwise");
  for (std::size_t size : {64, 256, 512}) {
    const std::size_t m = size, k = size, n = size;
    const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng), bt = random_vec(n * k, rng);
    const auto am = random_vec(m * n, rng);
    struct Case {
      const char* name;
      std::size_t out;
      void (*par)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
      void (*ser)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
      const double* x;
      const double* y;
    };
    const Case cases[] = {
        {"nn", m * n, kernels::gemm_nn, kernels::gemm_nn_serial, a.data(), b.data()},
        {"nt", m * k, kernels::gemm_nt, kernels::gemm_nt_serial, am.data(), bt.data()},
        {"tn", k * n, kernels::gemm_tn, kernels::gemm_tn_serial, a.data(), am.data()},
    };
    for (const auto& c : cases) {
      std::vector<double> cs(c.out), cp(c.out);
      const double ts = best_ms(reps, [&] {
        std::fill(cs.begin(), cs.end(), 0.0);
        c.ser(c.x, c.y, cs.data(), m, k, n);
      });
      const double tp = best_ms(reps, [&] {
        std::fill(cp.begin(), cp.end(), 0.0);
        c.par(c.x, c.y, cp.data(), m, k, n);
      });
      std::printf("%-8s %6zu %6zu %6zu %12.3f %12.3f %8.2f %s\n", c.name, m, k, n, ts, tp, ts / tp,
                  same_bits(cs, cp) ? "equal" : "DIFFER");
    }
  }
}

void bench_forecast(int reps) {
  model::ModelConfig cfg;
  const nn::ParameterStore params = model::init_model_params(cfg, 3);
  const std::size_t rows = 16, steps = 100, context = 80;
  data::SeriesBatch panel = data::SeriesBatch::zeros(rows, steps, 1, 1);
  Rng rng(11);
  for (std::size_t i = 0; i < rows; ++i) {
    panel.ids[i] = "s" + std::to_string(i);
    for (std::size_t t = 0; t < steps; ++t) {
      panel.y_at(i, t, 0) = rng.normal();
      panel.u_at(i, t, 0) = rng.uniform(-1.0, 1.0);
    }
  }
  fc::ForecastConfig fcfg;
  fcfg.horizon = steps - context;
  std::vector<fc::ForecastResult> rs, rp;
  const double ts = best_ms(reps, [&] { rs = fc::forecast_panel_serial(cfg, params, panel, context, fcfg); });
  const double tp = best_ms(reps, [&] { rp = fc::forecast_panel(cfg, params, panel, context, fcfg); });
  bool equal = rs.size() == rp.size();
  for (std::size_t i = 0; equal && i < rs.size(); ++i) {
    const auto a = rs[i].samples.data(), b = rp[i].samples.data();
    equal = std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  }
  std::printf("\nforecast_panel: %zu series x %zu samples, %zu + %zu steps\n", rows, fcfg.num_samples, context,
              fcfg.horizon);
  std::printf("  serial %.1f ms, parallel %.1f ms, speedup %.2f, samples %s\n", ts, tp, ts / tp,
              equal ? "equal" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs parallel kernel benchmark"};
  int reps = 5, threads = 0;
  app.add_option("--reps", reps, "Repetitions (best time is reported)")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "OpenMP threads (default: all cores)")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);
  std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
  bench_gemm(reps);
  bench_forecast(reps > 2 ? 2 : reps);
  return 0;
}
