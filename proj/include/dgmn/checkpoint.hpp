#pragma once

// Versioned binary checkpoint: little-endian float32 tensors addressed by
// path, with the effective run config, the vocabulary hash and a trailing
// checksum.

#include <string>

#include "dgmn/config.hpp"

namespace dgmn {

struct checkpoint_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void save_checkpoint(DgmnModel<float>& model, const RunConfig& cfg, std::uint64_t vocab_hash,
                     const std::string& path);

struct LoadedCheckpoint {
  RunConfig cfg;
  DgmnModel<float> model;
};

// vocab must match the hash stored at save time
LoadedCheckpoint load_checkpoint(const std::string& path, const Vocabulary& vocab);

// config/vocab-hash header only, without materializing the model
RunConfig peek_checkpoint_config(const std::string& path, std::uint64_t* vocab_hash = nullptr);

}  // namespace dgmn
