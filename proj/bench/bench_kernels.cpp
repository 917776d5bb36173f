// Wall-clock comparison of the batched OpenMP gradient against the serial
// per-example reference, plus one probe step, across hidden widths.
//
//   bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "lockstep/data.hpp"
#include "lockstep/ledger.hpp"
#include "lockstep/mlp.hpp"
#include "lockstep/model.hpp"
#include "lockstep/parallel.hpp"
#include "lockstep/probe.hpp"
#include "lockstep/reference.hpp"

using namespace lockstep;

namespace {

template <typename F>
double seconds_per_call(int repeats, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) f();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return elapsed.count() / repeats;
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  const auto data = gen_blobs(10, 100, 64, 3.0, 1);
  const auto batches = make_partition(data.rows, 100, 2);
  std::printf("threads=%d repeats=%d batch=100 input=64\n", thread_budget(), repeats);
  std::printf("%8s %10s %14s %14s %14s\n", "width", "params", "kernel_ms", "reference_ms",
              "probe_step_ms");
  for (std::size_t width : {64, 256, 1024}) {
    const MlpSpec spec({64, width, 10}, Activation::relu, LossKind::softmax_cross_entropy);
    const MlpModel model(spec, data);
    const auto w = init_params(spec, 3);
    volatile double sink = 0.0;
    const double kernel = seconds_per_call(repeats, [&] {
      sink = sink + loss_and_gradient(spec, w.values(), data, batches[0]).gradient[0];
    });
    const double ref = seconds_per_call(repeats, [&] {
      sink = sink + reference::gradient(spec, w.values(), data, batches[0])[0];
    });
    BatchLedger ledger(batches.size());
    for (std::int64_t s = 0; s < static_cast<std::int64_t>(batches.size()); ++s) {
      ledger.mark_used(batches[static_cast<std::size_t>(s)].batch_id, s);
    }
    const std::int64_t step = static_cast<std::int64_t>(batches.size()) - 1;
    const ProbePlan plan{1, 1, 5, 1, 7};
    const double probe = seconds_per_call(repeats, [&] {
      sink = sink + probe_step(model, w.values(), ledger, batches, batches.back().batch_id, 0.1,
                               plan, step)
                        .records.size();
    });
    std::printf("%8zu %10zu %14.3f %14.3f %14.3f\n", width, spec.param_count(), kernel * 1e3,
                ref * 1e3, probe * 1e3);
  }
  return 0;
}
