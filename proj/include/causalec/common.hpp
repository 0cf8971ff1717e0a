#pragma once

#include <cstdint>
#include <vector>

namespace causalec {

using Bytes = std::vector<std::uint8_t>;
using ServerId = std::uint32_t;
using ObjectId = std::uint32_t;
using ClientId = std::uint32_t;

}  // namespace causalec
