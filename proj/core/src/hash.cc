#include "gecw/hash.h"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "gecw/error.h"

namespace gecw {

std::uint64_t Fnv1a(std::string_view bytes) {
  Fnv1a64 h;
  h.Update(bytes);
  return h.digest();
}

std::uint64_t HashJoined(const std::vector<std::string>& items) {
  Fnv1a64 h;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) h.Update("\n");
    h.Update(items[i]);
  }
  return h.digest();
}

std::uint64_t HashFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  Fnv1a64 h;
  std::array<char, 1 << 14> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.Update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.digest();
}

std::string HashToString(std::uint64_t hash) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

std::uint64_t HashFromString(std::string_view text) {
  if (text.size() != 18 || text.substr(0, 2) != "0x") {
    throw Error("malformed hash '" + std::string(text) + "'");
  }
  std::uint64_t value = 0;
  auto [ptr, ec] =
      std::from_chars(text.data() + 2, text.data() + text.size(), value, 16);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error("malformed hash '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace gecw
