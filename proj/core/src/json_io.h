#ifndef GECW_JSON_IO_H_
#define GECW_JSON_IO_H_

// Internal helpers shared by the JSON-lines readers and writers.

#include <filesystem>
#include <fstream>
#include <string>

#include "gecw/error.h"

namespace gecw::internal {

inline std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

inline std::ifstream OpenIn(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

inline std::string Where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace gecw::internal

#endif  // GECW_JSON_IO_H_
