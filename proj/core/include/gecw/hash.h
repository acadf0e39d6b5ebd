#ifndef GECW_HASH_H_
#define GECW_HASH_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gecw {

// 64-bit FNV-1a.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffsetBasis = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void Update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= kPrime;
    }
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = kOffsetBasis;
};

std::uint64_t Fnv1a(std::string_view bytes);

// Hash of `items` joined by '\n' (no trailing separator).
std::uint64_t HashJoined(const std::vector<std::string>& items);

std::uint64_t HashFile(const std::filesystem::path& path);

// "0x" followed by 16 lowercase hex digits.
std::string HashToString(std::uint64_t hash);
std::uint64_t HashFromString(std::string_view text);

}  // namespace gecw

#endif  // GECW_HASH_H_
