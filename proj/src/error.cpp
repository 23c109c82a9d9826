#include "prs/error.hpp"

namespace prs {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::parse: return "parse";
    case Errc::invalid_model: return "invalid_model";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::diverged: return "diverged";
    case Errc::singular: return "singular";
    case Errc::infeasible: return "infeasible";
    case Errc::overdetermined: return "overdetermined";
    case Errc::eigensolve: return "eigensolve";
    case Errc::not_positive_definite: return "not_positive_definite";
    case Errc::no_anchor: return "no_anchor";
    case Errc::no_delta: return "no_delta";
    case Errc::io: return "io";
  }
  return "unknown";
}

}  // namespace prs
