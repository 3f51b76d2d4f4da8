#ifndef PROCRL_ERRORS_HPP_
#define PROCRL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace procrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PROCRL_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

PROCRL_DEFINE_ERROR(ShapeMismatch);
PROCRL_DEFINE_ERROR(LengthMismatch);
PROCRL_DEFINE_ERROR(CorpusExhausted);
PROCRL_DEFINE_ERROR(EmptyDataset);
PROCRL_DEFINE_ERROR(ConfigInvalid);
PROCRL_DEFINE_ERROR(MissingDependency);
PROCRL_DEFINE_ERROR(MissingMetrics);
PROCRL_DEFINE_ERROR(FormatError);

#undef PROCRL_DEFINE_ERROR

}  // namespace procrl

#endif  // PROCRL_ERRORS_HPP_
