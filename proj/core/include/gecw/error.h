#ifndef GECW_ERROR_H_
#define GECW_ERROR_H_

#include <stdexcept>
#include <string>

namespace gecw {

// All recoverable failures in the toolkit (bad input files, hash mismatches,
// contract violations on caller data) are reported with this type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gecw

#endif  // GECW_ERROR_H_
