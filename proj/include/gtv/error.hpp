#pragma once

#include <stdexcept>
#include <string>

namespace gtv {

/// Broad failure classes. The CLI maps these to exit codes and the
/// pipeline uses them to decide whether a failure is fatal.
enum class ErrorClass {
  Range,
  Domain,
  Input,
  Parse,
  Integrity,
  Ordering,
  Calibration,
  Configuration,
  Validation,
  Staleness,
  Protocol,
  Authentication,
  Unreachable,
  Crypto,
};

const char* to_string(ErrorClass c);

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const { return cls_; }

 private:
  ErrorClass cls_;
};

#define GTV_DEFINE_ERROR(Name, Cls)                                         \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(ErrorClass::Cls, what) {} \
  }

GTV_DEFINE_ERROR(RangeError, Range);
GTV_DEFINE_ERROR(DomainError, Domain);
GTV_DEFINE_ERROR(InputError, Input);
GTV_DEFINE_ERROR(CalibrationError, Calibration);
GTV_DEFINE_ERROR(ConfigError, Configuration);
GTV_DEFINE_ERROR(StalenessError, Staleness);
GTV_DEFINE_ERROR(UnreachableError, Unreachable);
GTV_DEFINE_ERROR(CryptoError, Crypto);

#undef GTV_DEFINE_ERROR

}  // namespace gtv
