#pragma once

// Little-endian tensor archive:
//   "DSSH" | version u32 | count u32 | count x entry
//   entry = name_len u32 | name bytes (UTF-8) | rank u32 | rank x dim u64 |
//           prod(dims) x f64
// Checkpoints store parameters under their names, followed by Adam moments
// as "<name>.adam.m" / "<name>.adam.v" and the step counter as the rank-0
// entry ".adam.t".

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dssh/adam.hpp"
#include "dssh/nn.hpp"

namespace dssh::nn {

inline constexpr std::uint32_t kArchiveVersion = 1;

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NamedTensor = std::pair<std::string, ad::Tensor>;

void write_archive(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_archive(const std::filesystem::path& path);

struct Checkpoint {
  ParameterStore params;
  std::optional<AdamState> optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const AdamState* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dssh::nn
