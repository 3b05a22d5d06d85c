#pragma once

#include <stdexcept>
#include <string>

namespace bai {

/// Raised for violated preconditions and invalid inputs anywhere in the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bai
