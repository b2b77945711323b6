#ifndef EXCOMP_ERRORS_HPP
#define EXCOMP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace excomp {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorCategory : int {
  config = 2,
  data = 3,
  estimation = 4,
  scenario = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message)
      : std::runtime_error(message), category_(category), kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

#define EXCOMP_DEFINE_ERROR(name, category)                       \
  class name : public Error {                                     \
   public:                                                        \
    explicit name(const std::string& message)                     \
        : Error(ErrorCategory::category, #name, message) {}       \
  }

EXCOMP_DEFINE_ERROR(ConfigError, config);

EXCOMP_DEFINE_ERROR(MissingColumn, data);
EXCOMP_DEFINE_ERROR(BadValue, data);

EXCOMP_DEFINE_ERROR(NonConvergence, estimation);
EXCOMP_DEFINE_ERROR(SingularInformation, estimation);
EXCOMP_DEFINE_ERROR(Separation, estimation);
EXCOMP_DEFINE_ERROR(InvalidInput, estimation);
EXCOMP_DEFINE_ERROR(WrongFamily, estimation);
EXCOMP_DEFINE_ERROR(EmptyCell, estimation);
EXCOMP_DEFINE_ERROR(PositivityViolation, estimation);
EXCOMP_DEFINE_ERROR(ZeroWeightMass, estimation);
EXCOMP_DEFINE_ERROR(DegenerateRatio, estimation);
EXCOMP_DEFINE_ERROR(MissingSharedArm, estimation);
EXCOMP_DEFINE_ERROR(MissingContributions, estimation);
EXCOMP_DEFINE_ERROR(TooManyFailedResamples, estimation);

EXCOMP_DEFINE_ERROR(ScenarioFailure, scenario);

#undef EXCOMP_DEFINE_ERROR

}  // namespace excomp

#endif  // EXCOMP_ERRORS_HPP
