#pragma once

#include <map>
#include <string>
#include <vector>

#include "bptd/model.hpp"

namespace bptd {

/// Versioned binary checkpoint: magic, version, model tag, dims header, then
/// named little-endian f64 arrays in a fixed order.
struct Checkpoint {
    std::string model_tag;
    ModelDims dims;
    std::vector<std::pair<std::string, std::vector<double>>> arrays;

    const std::vector<double>& array(const std::string& name) const;
    bool has(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

/// BPTD state <-> checkpoint (tag "bptd").
Checkpoint to_checkpoint(const BPTDState& state);
BPTDState bptd_from_checkpoint(const Checkpoint& ckpt);

}  // namespace bptd
