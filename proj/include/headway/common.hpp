#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace headway {

inline constexpr std::size_t kNumDirections = 2;

// NB runs from distance 0 of the line upward; SB runs from line_length down.
enum class Direction : int { NB = 0, SB = 1 };

inline constexpr std::size_t index(Direction d) { return static_cast<std::size_t>(d); }

inline std::string_view to_string(Direction d) { return d == Direction::NB ? "NB" : "SB"; }

inline Direction parse_direction(std::string_view token)
{
    if (token == "NB") return Direction::NB;
    if (token == "SB") return Direction::SB;
    throw std::invalid_argument("unknown direction token '" + std::string(token) + "'");
}

// Raised when an input violates a documented invariant (config, plan, schedule).
class InvariantError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Tensor/array shapes that do not line up with the declared dimensions.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// On-disk artifacts that are truncated, inconsistent, or from another version.
class CorruptFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace headway
