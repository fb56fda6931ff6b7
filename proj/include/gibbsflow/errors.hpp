#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gf {

// Every failure the library raises carries a stable kind string; the CLI
// prints it and maps it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define GF_DEFINE_ERROR(Name)                                        \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  };

GF_DEFINE_ERROR(UnknownIdentifier)
GF_DEFINE_ERROR(DomainError)
GF_DEFINE_ERROR(NotMarkov)
GF_DEFINE_ERROR(NotExpanding)
GF_DEFINE_ERROR(RoofOutOfRange)
GF_DEFINE_ERROR(NotCovering)
GF_DEFINE_ERROR(CapExceeded)
GF_DEFINE_ERROR(NoConvergence)
GF_DEFINE_ERROR(FrequencyTooSmall)
GF_DEFINE_ERROR(BracketFailure)
GF_DEFINE_ERROR(EmptyDomain)
GF_DEFINE_ERROR(NotSiblings)
GF_DEFINE_ERROR(NoCancellationWitness)
GF_DEFINE_ERROR(InsufficientSignal)
GF_DEFINE_ERROR(MissingManifest)
GF_DEFINE_ERROR(PreconditionFailed)

#undef GF_DEFINE_ERROR

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : Error("SyntaxError", what + " at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string pointer)
      : Error("ConfigError", what + " (at " + (pointer.empty() ? "/" : pointer) + ")"),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace gf
