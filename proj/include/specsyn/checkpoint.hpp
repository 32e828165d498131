#pragma once

// Binary model file: "SPSY", u32 version, vocabulary table, then named
// tensors (name, rows, cols, row-major little-endian doubles). All integers
// are little-endian u32.

#include <cstdint>
#include <string>

#include "specsyn/model.hpp"

namespace specsyn::checkpoint {

inline constexpr std::uint32_t kVersion = 1;

class FormatError : public Error {
 public:
  using Error::Error;
};

std::string serialize(const model::SpecModel& model);
model::SpecModel deserialize(const std::string& bytes);

void save(const model::SpecModel& model, const std::string& path);
model::SpecModel load(const std::string& path);

}  // namespace specsyn::checkpoint
