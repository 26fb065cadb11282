#pragma once

#include <string>
#include <vector>

#include "qsmpad/conv_ops.hpp"

namespace qsmpad {

// Little-endian checkpoint container:
//   magic "QSMW" | version u32 = 1 | layer count u32 | per layer:
//   pad-mode tag u8 | in_channels u32 | out_channels u32 | est_trainable u8 |
//   weights f64[oc*ic*27] | bias f64[oc] |
//   (neighbor mode only) feat_kernel f64[27] | mask_kernel f64[27]
void save_checkpoint(const std::string& path, const std::vector<ConvLayer>& layers);
std::vector<ConvLayer> load_checkpoint(const std::string& path);

} // namespace qsmpad
