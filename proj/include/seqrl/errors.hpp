#pragma once

#include <stdexcept>
#include <string>

namespace seqrl {

/// Base of every error the library throws. `kind()` is the stable name used
/// in reports and CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SEQRL_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

SEQRL_DEFINE_ERROR(RowSumError)
SEQRL_DEFINE_ERROR(MissingRow)
SEQRL_DEFINE_ERROR(AliasMismatch)
SEQRL_DEFINE_ERROR(BudgetExceeded)
SEQRL_DEFINE_ERROR(NotBijective)
SEQRL_DEFINE_ERROR(DegenerateInterval)
SEQRL_DEFINE_ERROR(UnreachableHistory)
SEQRL_DEFINE_ERROR(NotMarkovEnv)
SEQRL_DEFINE_ERROR(HorizonTooLarge)
SEQRL_DEFINE_ERROR(MissingPolicyRow)
SEQRL_DEFINE_ERROR(EmptyCell)
SEQRL_DEFINE_ERROR(InvalidParam)
SEQRL_DEFINE_ERROR(InvalidSizes)
SEQRL_DEFINE_ERROR(IoError)
SEQRL_DEFINE_ERROR(ParseError)

#undef SEQRL_DEFINE_ERROR

}  // namespace seqrl
