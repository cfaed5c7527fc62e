#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace normkit {

// Base for every failure caused by input data (files, records, identifiers).
// The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line (or record) number.
class LoadError : public DataError {
 public:
  LoadError(std::string path, std::size_t line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what),
        path_(std::move(path)),
        line_(line) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

// Invalid argument combination (dimension mismatch, empty index, ...).
class InvalidInput : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace normkit
