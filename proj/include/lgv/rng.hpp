#pragma once

#include <array>
#include <cstdint>

namespace lgv {

// Philox4x32-10 (Salmon et al., SC'11). Stateless: output depends only on (counter, key).
struct Philox4x32 {
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Block generate(Block counter, Key key) noexcept;
};

// Substream identifiers. Keeping initial-state draws apart from increments is what lets a
// perturbed and an unperturbed run consume identical Brownian increments.
enum class Stream : std::uint32_t { initial = 0, increments = 1, auxiliary = 2 };

// Sequential view over the Philox counter space of one (seed, path, stream) triple.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t path, Stream stream) noexcept;

  double uniform() noexcept;           // [0, 1)
  double uniform_open_low() noexcept;  // (0, 1]
  double normal() noexcept;

 private:
  std::uint64_t next_bits() noexcept;

  Philox4x32::Key key_;
  std::uint32_t path_;
  std::uint32_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Block buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lgv
