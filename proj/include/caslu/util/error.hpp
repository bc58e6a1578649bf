#pragma once

#include <stdexcept>
#include <string>

namespace caslu {

// Base of every error the toolkit raises. The CLI maps subclasses onto exit
// codes (input errors -> 2, divergence -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced where a finite value was required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Every position of a masked operation is masked out.
class DegenerateMaskError : public Error {
 public:
  using Error::Error;
};

// A caller violated an operation precondition (range, simplex, pairing...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed input file or record. `line` is 1-based, 0 when not applicable.
// With a file name the message reads "file:line: detail".
class SchemaError : public Error {
 public:
  SchemaError(const std::string& detail, std::size_t line = 0, const std::string& file = "")
      : Error(format(detail, line, file)), detail_(detail), file_(file), line_(line) {}
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }
  const std::string& file() const { return file_; }
  SchemaError in_file(const std::string& file) const { return SchemaError(detail_, line_, file); }

 private:
  static std::string format(const std::string& detail, std::size_t line, const std::string& file) {
    if (file.empty()) return line ? "line " + std::to_string(line) + ": " + detail : detail;
    return file + (line ? ":" + std::to_string(line) : std::string()) + ": " + detail;
  }
  std::string detail_;
  std::string file_;
  std::size_t line_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, int epoch, int batch)
      : Error(msg + " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ")"),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace caslu
