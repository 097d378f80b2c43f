#include "txmsm/errors.hpp"

#include <fmt/format.h>

namespace txmsm {

Error::Error(ErrorCategory category, std::string code, const std::string &message)
    : std::runtime_error(fmt::format("{}: {}", code, message)), category_{category},
      code_{std::move(code)} {}

CohortError::CohortError(std::string code, std::string pin, std::size_t row,
                         const std::string &detail)
    : InputError(code, fmt::format("subject '{}', row {}: {}", pin, row, detail)),
      pin_{std::move(pin)}, row_{row} {}

} // namespace txmsm
