#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace gates {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kPadToken = 0;
inline constexpr TokenId kEosToken = 1;

enum class Role { tutor, student };

constexpr std::string_view role_name(Role r) { return r == Role::tutor ? "tutor" : "student"; }

}  // namespace gates
