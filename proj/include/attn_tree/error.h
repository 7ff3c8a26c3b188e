#pragma once

#include <stdexcept>
#include <string>

namespace attn_tree {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CoNLL-U input. The message always carries the line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Broken ATNA archive: bad magic, unsupported version, truncation.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Data that parses but violates an invariant (coverage, shape, alignment).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace attn_tree
