#pragma once

#include <stdexcept>
#include <string>

namespace visunit {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (dictionary, map, corpus, model, LM files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// A phoneme or label that cannot be translated under a P2V map or vocabulary.
class MappingError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or violated precondition on arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Structural problems with models, networks or data (e.g. no admissible path).
class ModelError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public ModelError {
 public:
  using ModelError::ModelError;
};

}  // namespace visunit
