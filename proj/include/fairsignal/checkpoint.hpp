#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "fairsignal/agent.hpp"

namespace fairsignal {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout, all integers and floats little-endian:
//   8 bytes   magic "FSQNET01"
//   u32       format version (1)
//   u32       number of layer dims D
//   u32 x D   layer dims
//   per layer l: f64 weights row-major (dims[l+1] x dims[l]), then f64 biases
// Nothing may follow the last bias.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const MlpParams& params);
MlpParams read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const MlpParams& params);
MlpParams load_checkpoint(const std::string& path);

}  // namespace fairsignal
