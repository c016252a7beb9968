#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tmf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A record in a rating log could not be parsed.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters, slicing options or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// SGD produced a non-finite latent entry.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class EmptyTestError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Wraps an error raised inside one pipeline stage with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace tmf
