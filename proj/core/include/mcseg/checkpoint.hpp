#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mcseg/corpus.hpp"
#include "mcseg/encoder.hpp"
#include "mcseg/params.hpp"

namespace mcseg {

inline constexpr int kCheckpointFormat = 1;

class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

// Everything needed to rebuild a model besides the raw parameters.
struct ModelMeta {
    EncoderConfig encoder;
    std::vector<std::string> domains;
    bool has_shared = true;
    int format = kCheckpointFormat;
};

// On-disk layout (a directory):
//   manifest.json  - format version, model metadata, and one entry per
//                    parameter: name, shape, precision, offset, count
//   params.bin     - concatenated little-endian 32-bit floats, manifest order
//   vocab.txt      - one character per line, line number = id
void save_checkpoint(const std::string& dir, const ModelMeta& meta,
                     const ParamStore& params, const Vocabulary& vocab);

struct Checkpoint {
    ModelMeta meta;
    ParamStore params;
    Vocabulary vocab;
};

// Throws CheckpointError on missing/erroneous files.
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace mcseg
