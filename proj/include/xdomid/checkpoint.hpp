#pragma once

#include <string>

#include "xdomid/networks.hpp"

namespace xdomid {

// "XDC1" container: magic, UTF-8 metadata record, manifest of
// (name, shape, byte offset), then concatenated tensor payloads in the
// tensor-file layout. load(save(b)) is bitwise.
void save_checkpoint(const ModelBundle& bundle, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

}  // namespace xdomid
