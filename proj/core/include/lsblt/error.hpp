#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lsblt {

// Raised when input data (files, records, corpora) violates its contract.
// Precondition violations on programmatic arguments use std::invalid_argument.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
  DataError(const std::string& what, std::vector<std::string> details)
      : std::runtime_error(what), details_(std::move(details)) {}

  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  std::vector<std::string> details_;
};

}  // namespace lsblt
