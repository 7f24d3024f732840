#pragma once

// Runs the cliquemine executable and a small end-to-end pipeline through it.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "support.hpp"

#ifndef CLIQUEMINE_BIN
#error "CLIQUEMINE_BIN must point at the cliquemine executable"
#endif

namespace cli {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

inline Run run(const std::string& args, const std::filesystem::path& scratch) {
  const auto out = scratch / "stdout.txt";
  const auto err = scratch / "stderr.txt";
  const std::string cmd =
      std::string("\"") + CLIQUEMINE_BIN + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status)) throw std::runtime_error("cliquemine did not exit normally: " + args);
  return {WEXITSTATUS(status), support::slurp(out), support::slurp(err)};
}

inline const std::string kWorld = "--num-cities 1 --sequences-per-city 8 --path-length 300 --raw-dim 16";
inline const std::string kMine = "--N 8 --K 3 --S 7 --num-batches 6 --clique-fraction 0.75";

/// synth, mine (clique and random), train, eval, curve and gds into `dir`.
/// Returns the output files, relative to `dir`, that must be reproducible.
inline std::vector<std::string> pipeline(const std::filesystem::path& dir, const std::filesystem::path& scratch,
                                         int threads) {
  const std::string d = "\"" + dir.string() + "\"";
  const std::string t = " --threads " + std::to_string(threads);
  auto ok = [&](const std::string& args) {
    const Run r = run(args, scratch);
    if (r.code != 0) throw std::runtime_error("cliquemine " + args + " exited " + std::to_string(r.code) + ": " + r.err);
  };
  ok("synth --seed 3 --kind world " + kWorld + " --out " + d);
  ok("synth --seed 3 --kind sparse " + kWorld + " --num-groups 60 --out " + d);
  ok("synth --seed 3 --kind benchmark " + kWorld + " --first-city 1 --field-seed 3 --out " + d);
  ok("mine --seed 4 " + kMine + t + " --dataset " + d + "/world --sparse " + d + "/sparse --out " + d + "/b.json");
  ok("mine --seed 4 " + kMine + t + " --random-places --sparse " + d + "/sparse --out " + d + "/r.json");
  ok("train --seed 5 --epochs 2 --shuffle --recompute-cliques" + t + " --dataset " + d + "/world --sparse " + d +
     "/sparse --batches " + d + "/b.json --out " + d + "/train");
  const std::string in =
      " --database " + d + "/database --queries " + d + "/queries --embedder " + d + "/train/embedder.bin";
  ok("eval" + t + in + " --k 1,5 --out " + d + "/eval");
  ok("curve" + t + in + " --thresholds 10,25,50 --out " + d + "/curve");
  ok("gds --seed 6" + t + in + " --ordering-trials 2000 --pair-budget 500 --out " + d + "/gds");
  return {"world.jsonl",     "world.gemb",      "sparse.jsonl",    "sparse.gemb",        "database.jsonl",
          "database.gemb",   "queries.jsonl",   "queries.gemb",    "b.json",             "r.json",
          "train/embedder.bin", "train/loss_trace.csv", "eval/recall.csv", "curve/curve.csv",
          "curve/curve.svg", "gds/gds.csv",     "gds/gds.svg",     "gds/ordering.csv"};
}

}  // namespace cli
