#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advtex/grid.hpp"
#include "advtex/loss.hpp"
#include "advtex/types.hpp"

namespace advtex {

// metrics.csv: header "iteration,J,S,cost_sum,subtlety_penalty", doubles at
// full precision (%.17g) so byte-identity across runs implies value identity.
void write_metrics_csv(const std::vector<LossReport>& reports, const std::string& path);

// Trajectory CSV: t,x,y,heading,steer,cost at 9 significant digits; the final
// state carries steer = 0 (no control is applied after t = T).
void write_trajectory_csv(const Trajectory& trajectory, const std::vector<double>& costs,
                          const std::string& path);

// Checkpoint: raw little-endian float64 values, row-major HWC, followed by
// one uint8 per coordinate for the freeze mask. A JSON sidecar
// `<path>.json` records {"shape": [H, W, C], "seed": ..., "iteration": ...}.
void write_checkpoint(const Grid3& theta, const Mask3& freeze, uint64_t seed, int iteration,
                      const std::string& path);

struct Checkpoint {
    Grid3 theta;
    Mask3 freeze;
    uint64_t seed = 0;
    int iteration = 0;
};

Checkpoint read_checkpoint(const std::string& path);

// manifest.json for --out directories: every input and output file with its
// FNV-1a content hash.
struct ManifestEntry {
    std::string role;  // "input" | "output"
    std::string path;
    std::string fnv1a64;
};

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

}  // namespace advtex
