#pragma once

#include <json.hpp>

#include "mslab/matrix_core.hpp"

namespace mslab {

/// {"n": n, "d": d, "matrices": [{"re": [[...]], "im": [[...]]}, ...]}.
/// "im" may be omitted for real matrices; {"diag": [...]} is accepted as a
/// shorthand for a real diagonal matrix.
nlohmann::json to_json(const MatrixTuple& x);
MatrixTuple tuple_from_json(const nlohmann::json& j);

}  // namespace mslab
