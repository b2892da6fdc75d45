// Session-throughput benchmark: serial reference vs the OpenMP kernel.
// Verifies that both produce identical reports before timing them.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qkd/attack.hpp"
#include "qkd/protocol.hpp"

using namespace qkd;

namespace {

double time_run(SessionReport (*runner)(const ProtocolScheme&, const SessionConfig&),
                const ProtocolScheme& scheme, const SessionConfig& config,
                SessionReport& out) {
  auto start = std::chrono::steady_clock::now();
  out = runner(scheme, config);
  auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  std::uint64_t rounds = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 4000000;
  std::string adversary = argc > 2 ? argv[2] : "grouped";

  ProtocolScheme scheme = scheme_mz_xz_bb84();
  scheme.monitored_modes = {ModeLabel::time_bin("a", -1), ModeLabel::time_bin("b", -1),
                            ModeLabel::time_bin("a", 2), ModeLabel::time_bin("b", 2)};

  AttackPlan plan;
  SessionConfig config{.rounds = rounds, .seed = 12345, .plan = nullptr,
                       .collect_records = false, .alice_weights = {}};
  if (adversary == "per-outcome") {
    plan = synthesize_per_outcome(scheme.composed);
    config.plan = &plan;
  } else if (adversary == "grouped") {
    plan = synthesize_grouped(scheme.composed, protocol_restriction(scheme), "t0-t1");
    config.plan = &plan;
  } else if (adversary != "none") {
    std::fprintf(stderr, "usage: qkd_bench [rounds] [none|per-outcome|grouped]\n");
    return 2;
  }

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("scheme=%s adversary=%s rounds=%llu threads=%d\n", scheme.name.c_str(),
              adversary.c_str(), static_cast<unsigned long long>(rounds), threads);

  SessionReport serial, parallel;
  double t_serial = time_run(run_session_serial, scheme, config, serial);
  double t_parallel = time_run(run_session, scheme, config, parallel);

  if (!(serial == parallel)) {
    std::fprintf(stderr, "FAIL: parallel report differs from the serial reference\n");
    return 1;
  }

  std::printf("serial:   %8.3f s  (%.2f Mrounds/s)\n", t_serial,
              rounds / t_serial / 1e6);
  std::printf("parallel: %8.3f s  (%.2f Mrounds/s)\n", t_parallel,
              rounds / t_parallel / 1e6);
  std::printf("speedup:  %.2fx\n", t_serial / t_parallel);
  std::printf("qber=%g eve_agreement=%g alarms=%llu\n", serial.qber(),
              serial.eve_agreement(),
              static_cast<unsigned long long>(serial.monitor_alarms));
  return 0;
}
