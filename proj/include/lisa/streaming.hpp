#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lisa/attention.hpp"
#include "lisa/types.hpp"

namespace lisa {

enum class StateMode : std::uint8_t { hard, soft };

/// Constant-size summary of a user's history: the codeword histogram of every
/// item consumed so far plus the codeword ids of the latest item. Hard states
/// keep integer counts, soft states keep real masses; the two never mix.
struct UserState {
  std::uint32_t num_books = 0;
  std::uint32_t num_words = 0;
  std::uint64_t step = 0;
  StateMode mode = StateMode::hard;
  std::vector<CodewordId> last_indices;  // kUnsetIndex until the first update
  std::vector<std::uint32_t> counts;     // B x W, hard mode only
  std::vector<double> masses;            // B x W, soft mode only

  friend bool operator==(const UserState&, const UserState&) = default;
};

inline constexpr CodewordId kUnsetIndex = 0xFFFF;

UserState state_init(std::size_t num_books, std::size_t num_words,
                     StateMode mode = StateMode::hard);

/// Adds one item. Throws OutOfRange for ids >= W and InvalidInput on a soft
/// state.
void state_update(UserState& state, std::span<const CodewordId> item_indices);

/// Adds one softly assigned item: `masses` is its B x W assignment row and
/// `item_indices` its hard ids (used as the query on the next inference).
void state_update_soft(UserState& state, std::span<const double> masses,
                       std::span<const CodewordId> item_indices);

/// Attention output for the latest item against the whole consumed history.
/// O(B W D) regardless of step. Throws EmptyHistory when step == 0.
std::vector<double> step_infer(const UserState& state, const InnerProductTable& table,
                               const ProjectedValues& values);

/// Bytes of a serialized state record.
std::size_t state_record_size(std::size_t num_books, std::size_t num_words, StateMode mode);

/// Little-endian record: u32 B, u32 W, u64 step, B x u16 last ids, then
/// B x W counts (u32, hard) or masses (f64, soft). The mode follows from the
/// record length.
std::vector<std::uint8_t> serialize_state(const UserState& state);
UserState deserialize_state(std::span<const std::uint8_t> bytes);

}  // namespace lisa
