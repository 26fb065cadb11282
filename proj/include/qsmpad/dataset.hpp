#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsmpad/phantom.hpp"
#include "qsmpad/volume.hpp"

namespace qsmpad {

// One synthesized training/testing case. All four grids are identical;
// local_field = forward(chi) and total_field = forward(chi + chi_background)
// by construction.
struct QsmSample {
    Volume3D chi;
    Volume3D local_field;
    Volume3D total_field;
    Mask3D brain_mask;
};

// Sample i derives all of its randomness from seed + i, so generation order
// and scheduling cannot change results.
std::vector<QsmSample> synthesize_dataset(const PhantomConfig& config, int n, const GridMeta& meta,
                                          std::uint64_t seed);

// Directory layout: <dir>/sample_<i>/{chi.qsmv, local.qsmv, total.qsmv,
// mask.qsmm} plus a `manifest` text file with sample seeds and config digest.
void write_dataset(const std::string& dir, const std::vector<QsmSample>& samples,
                   std::uint64_t seed, std::uint64_t config_digest);

std::vector<QsmSample> load_dataset(const std::string& dir);

int dataset_sample_count(const std::string& dir);

} // namespace qsmpad
