#pragma once

#include <filesystem>
#include <string>

#include "t2dm/nn.hpp"

namespace t2dm {

// Checkpoint / pre-trained-weight file pair: `<stem>.json` manifest with
// (name, shape, dtype, offset) entries and `<stem>.bin` raw little-endian
// float32 blobs, row-major.
void save_weights(nn::ParamStore<float>& params, const std::filesystem::path& stem);

// Loads into an existing registry; every manifest entry must match a
// registered parameter. Throws DataError naming the first mismatched
// parameter (unknown name, wrong shape, or one missing from the file).
void load_weights(nn::ParamStore<float>& params, const std::filesystem::path& stem);

}  // namespace t2dm
