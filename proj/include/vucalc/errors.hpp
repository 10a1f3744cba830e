#pragma once

#include <stdexcept>
#include <string>

namespace vucalc {

// Base for everything thrown by the library. The CLI maps subtypes to exit codes:
// validation/parse -> 2, hypothesis violations -> 3, numerical failures -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- validation -------------------------------------------------------------
struct DimensionMismatch : Error { using Error::Error; };
struct NonFiniteInput : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };

// -- structural / hypothesis violations --------------------------------------
struct RankDeficientVBar : Error { using Error::Error; };
struct PdgInconsistent : Error { using Error::Error; };
struct GeneratorBudgetExceeded : Error { using Error::Error; };
struct MissingHorizonInfo : Error { using Error::Error; };
struct TransversalityViolated : Error { using Error::Error; };
struct SumRuleConditionViolated : Error { using Error::Error; };
struct AffineDependence : Error { using Error::Error; };

// -- numerical failures -------------------------------------------------------
struct NewtonDiverged : Error { using Error::Error; };
struct SingularNewtonJacobian : Error { using Error::Error; };
struct SingularVtV : Error { using Error::Error; };
struct InsufficientSamples : Error { using Error::Error; };

} // namespace vucalc
