#include "lisa/streaming.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "lisa/errors.hpp"

namespace lisa {

namespace {

static_assert(std::endian::native == std::endian::little,
              "state records are written in host byte order, which must be little-endian");

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

void check_ids(const UserState& state, std::span<const CodewordId> ids) {
  LISA_REQUIRE(ids.size() == state.num_books, InvalidInput,
               "item has " + std::to_string(ids.size()) + " codeword ids, state expects " +
                   std::to_string(state.num_books));
  for (std::size_t b = 0; b < ids.size(); ++b) {
    LISA_REQUIRE(ids[b] < state.num_words, OutOfRange,
                 "codeword id " + std::to_string(ids[b]) + " in codebook " + std::to_string(b) +
                     " is >= W=" + std::to_string(state.num_words));
  }
}

constexpr std::size_t kHeaderBytes = 16;

}  // namespace

UserState state_init(std::size_t num_books, std::size_t num_words, StateMode mode) {
  LISA_REQUIRE(num_books >= 1, InvalidInput, "state needs B >= 1");
  LISA_REQUIRE(num_words >= 2 && num_words <= kMaxCodewords, InvalidInput,
               "state needs 2 <= W <= 65536");
  UserState state;
  state.num_books = static_cast<std::uint32_t>(num_books);
  state.num_words = static_cast<std::uint32_t>(num_words);
  state.mode = mode;
  state.last_indices.assign(num_books, kUnsetIndex);
  if (mode == StateMode::hard) {
    state.counts.assign(num_books * num_words, 0);
  } else {
    state.masses.assign(num_books * num_words, 0.0);
  }
  return state;
}

void state_update(UserState& state, std::span<const CodewordId> item_indices) {
  LISA_REQUIRE(state.mode == StateMode::hard, InvalidInput,
               "hard update applied to a soft-mode state");
  check_ids(state, item_indices);
  for (std::size_t b = 0; b < item_indices.size(); ++b) {
    auto& count = state.counts[b * state.num_words + item_indices[b]];
    LISA_REQUIRE(count < std::numeric_limits<std::uint32_t>::max(), NumericRange,
                 "codeword count overflow");
    ++count;
  }
  std::copy(item_indices.begin(), item_indices.end(), state.last_indices.begin());
  ++state.step;
}

void state_update_soft(UserState& state, std::span<const double> masses,
                       std::span<const CodewordId> item_indices) {
  LISA_REQUIRE(state.mode == StateMode::soft, InvalidInput,
               "soft update applied to a hard-mode state");
  check_ids(state, item_indices);
  LISA_REQUIRE(masses.size() == state.masses.size(), InvalidInput,
               "soft update must carry B x W masses");
  for (std::size_t k = 0; k < masses.size(); ++k) {
    LISA_REQUIRE(std::isfinite(masses[k]) && masses[k] >= 0.0, InvalidInput,
                 "soft masses must be finite and nonnegative");
    state.masses[k] += masses[k];
  }
  std::copy(item_indices.begin(), item_indices.end(), state.last_indices.begin());
  ++state.step;
}

std::vector<double> step_infer(const UserState& state, const InnerProductTable& table,
                               const ProjectedValues& values) {
  if (state.step == 0) {
    throw EmptyHistory("cannot infer from a state that has consumed no items");
  }
  LISA_REQUIRE(table.num_books() == state.num_books && table.num_words() == state.num_words &&
                   values.num_books() == state.num_books && values.num_words() == state.num_words,
               InvalidInput, "state shape does not match the inner-product table");
  std::vector<double> out(values.dim());
  if (state.mode == StateMode::soft) {
    attend_row(state.masses, state.last_indices, table, values, out, 1e-30);
    return out;
  }
  std::vector<double> histogram(state.counts.begin(), state.counts.end());
  attend_row(histogram, state.last_indices, table, values, out);
  return out;
}

std::size_t state_record_size(std::size_t num_books, std::size_t num_words, StateMode mode) {
  const std::size_t cell = mode == StateMode::hard ? sizeof(std::uint32_t) : sizeof(double);
  return kHeaderBytes + num_books * sizeof(CodewordId) + num_books * num_words * cell;
}

std::vector<std::uint8_t> serialize_state(const UserState& state) {
  std::vector<std::uint8_t> out;
  out.reserve(state_record_size(state.num_books, state.num_words, state.mode));
  put(out, state.num_books);
  put(out, state.num_words);
  put(out, state.step);
  for (CodewordId id : state.last_indices) {
    put(out, id);
  }
  if (state.mode == StateMode::hard) {
    for (std::uint32_t c : state.counts) {
      put(out, c);
    }
  } else {
    for (double m : state.masses) {
      put(out, m);
    }
  }
  return out;
}

UserState deserialize_state(std::span<const std::uint8_t> bytes) {
  LISA_REQUIRE(bytes.size() >= kHeaderBytes, InvalidInput, "state record is truncated");
  std::size_t offset = 0;
  const auto num_books = get<std::uint32_t>(bytes, offset);
  const auto num_words = get<std::uint32_t>(bytes, offset);
  const auto step = get<std::uint64_t>(bytes, offset);

  StateMode mode;
  if (bytes.size() == state_record_size(num_books, num_words, StateMode::hard)) {
    mode = StateMode::hard;
  } else if (bytes.size() == state_record_size(num_books, num_words, StateMode::soft)) {
    mode = StateMode::soft;
  } else {
    throw InvalidInput("state record length " + std::to_string(bytes.size()) +
                       " matches neither layout for B=" + std::to_string(num_books) +
                       ", W=" + std::to_string(num_words));
  }

  UserState state = state_init(num_books, num_words, mode);
  state.step = step;
  for (auto& id : state.last_indices) {
    id = get<CodewordId>(bytes, offset);
  }
  if (mode == StateMode::hard) {
    for (auto& c : state.counts) {
      c = get<std::uint32_t>(bytes, offset);
    }
    for (std::uint32_t b = 0; b < num_books; ++b) {
      std::uint64_t total = 0;
      for (std::uint32_t w = 0; w < num_words; ++w) {
        total += state.counts[b * num_words + w];
      }
      LISA_REQUIRE(total == step, InvalidInput,
                   "state record histogram row " + std::to_string(b) +
                       " does not sum to its step count");
    }
  } else {
    for (auto& m : state.masses) {
      m = get<double>(bytes, offset);
    }
  }
  if (step > 0) {
    for (CodewordId id : state.last_indices) {
      LISA_REQUIRE(id < num_words, OutOfRange, "state record holds an out-of-range last id");
    }
  }
  return state;
}

}  // namespace lisa
