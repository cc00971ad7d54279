// SPDX-License-Identifier: Apache-2.0
//
// Times the serial reference implementations against the OpenMP-parallel
// kernels and verifies that both produce identical results:
//   - per-frame pitch/intensity analysis
//   - per-example batch gradient accumulation
//   - per-word corpus generation
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "stressdet/augmentation.hpp"
#include "stressdet/parallel.hpp"
#include "stressdet/prosody.hpp"
#include "stressdet/training.hpp"

using namespace stressdet;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct BenchRow {
  const char* name;
  double serial_ms;
  double parallel_ms;
  bool identical;
};

BenchRow bench_frames(double seconds) {
  AudioSignal audio;
  audio.samples.resize(static_cast<std::size_t>(seconds * 16000.0));
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    audio.samples[i] = 0.6 * std::sin(2.0 * M_PI * (140.0 + 30.0 * std::sin(t)) * t);
  }
  const FrameGrid grid = word_frame_grid(0.0, seconds);

  auto t0 = Clock::now();
  const PitchTrack serial = compute_f0(audio, grid, {}, Exec::serial);
  const std::vector<double> int_serial = compute_intensity(audio, grid, Exec::serial);
  const double serial_ms = ms_since(t0);

  t0 = Clock::now();
  const PitchTrack parallel = compute_f0(audio, grid, {}, Exec::parallel);
  const std::vector<double> int_parallel = compute_intensity(audio, grid, Exec::parallel);
  const double parallel_ms = ms_since(t0);

  return {"frame analysis", serial_ms, parallel_ms,
          serial.f0_hz == parallel.f0_hz && serial.voiced == parallel.voiced &&
              int_serial == int_parallel};
}

BenchRow bench_gradients(int words) {
  CorpusSpec spec;
  spec.name = "bench";
  spec.total_words = words;
  spec.speakers = 8;
  spec.error_rate = 0.5;
  spec.seed = 42;
  const GeneratedCorpus corpus = generate_corpus(spec, Exec::serial);
  const std::vector<Batch> batches = build_batches(corpus.examples, 32);
  const ModelConfig cfg;
  const ModelParameters params = init_parameters(cfg, 7);

  auto run = [&](Exec exec) {
    std::vector<BatchGradients> grads;
    for (const auto& batch : batches) {
      grads.push_back(compute_gradients(batch, params, cfg, 11, exec));
    }
    return grads;
  };

  auto t0 = Clock::now();
  const auto serial = run(Exec::serial);
  const double serial_ms = ms_since(t0);
  t0 = Clock::now();
  const auto parallel = run(Exec::parallel);
  const double parallel_ms = ms_since(t0);

  bool identical = serial.size() == parallel.size();
  for (std::size_t b = 0; identical && b < serial.size(); ++b) {
    identical = serial[b].loss == parallel[b].loss;
    auto& sp = const_cast<ModelParameters&>(serial[b].grads);
    std::vector<const Eigen::MatrixXd*> pg;
    visit_tensors(const_cast<ModelParameters&>(parallel[b].grads),
                  [&](const char*, Eigen::MatrixXd& m) { pg.push_back(&m); });
    std::size_t i = 0;
    visit_tensors(sp, [&](const char*, Eigen::MatrixXd& m) {
      if (!(m.array() == pg[i++]->array()).all()) identical = false;
    });
  }
  return {"batch gradients", serial_ms, parallel_ms, identical};
}

BenchRow bench_corpus(int words) {
  CorpusSpec spec;
  spec.name = "bench";
  spec.total_words = words;
  spec.speakers = 16;
  spec.error_rate = 0.3;
  spec.seed = 99;

  auto t0 = Clock::now();
  const GeneratedCorpus serial = generate_corpus(spec, Exec::serial);
  const double serial_ms = ms_since(t0);
  t0 = Clock::now();
  const GeneratedCorpus parallel = generate_corpus(spec, Exec::parallel);
  const double parallel_ms = ms_since(t0);

  bool identical = serial.examples.size() == parallel.examples.size();
  for (std::size_t i = 0; identical && i < serial.examples.size(); ++i) {
    identical = serial.examples[i].features.f0_hz == parallel.examples[i].features.f0_hz &&
                serial.examples[i].alignment.uid == parallel.examples[i].alignment.uid;
  }
  return {"corpus generation", serial_ms, parallel_ms, identical};
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) quick = true;
  }
  const double audio_seconds = quick ? 4.0 : 30.0;
  const int gradient_words = quick ? 64 : 512;
  const int corpus_words = quick ? 200 : 4000;

  std::printf("threads: %d\n", hardware_threads());
  std::printf("%-20s %12s %12s %9s %s\n", "kernel", "serial [ms]",
              "parallel [ms]", "speedup", "bitwise-equal");

  const BenchRow rows[] = {bench_frames(audio_seconds),
                           bench_gradients(gradient_words),
                           bench_corpus(corpus_words)};
  bool all_equal = true;
  for (const auto& row : rows) {
    std::printf("%-20s %12.1f %12.1f %8.2fx %s\n", row.name, row.serial_ms,
                row.parallel_ms, row.serial_ms / row.parallel_ms,
                row.identical ? "yes" : "NO");
    all_equal = all_equal && row.identical;
  }
  return all_equal ? 0 : 1;
}
