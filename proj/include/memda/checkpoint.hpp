#pragma once

#include <string>

#include "memda/model.hpp"

namespace memda {

/// Binary snapshot: model config as JSON plus every named parameter tensor.
/// Writing the same model twice yields byte-identical files.
void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace memda
