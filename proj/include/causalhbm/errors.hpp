#pragma once

#include <stdexcept>
#include <string>

namespace causalhbm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CyclicGraphError : Error { using Error::Error; };
struct InvalidDagError : Error { using Error::Error; };
struct ShapeMismatchError : Error { using Error::Error; };
struct RejectionExhaustedError : Error { using Error::Error; };
struct SingularSystemError : Error { using Error::Error; };
struct EmptySampleError : Error { using Error::Error; };
struct NoInterventionVariablesError : Error { using Error::Error; };
struct NoInterventionDataError : Error { using Error::Error; };
struct MissingEmbeddingsError : Error { using Error::Error; };
struct MissingGroundTruthError : Error { using Error::Error; };
struct DegenerateAffinityError : Error { using Error::Error; };
struct EmptyGroupError : Error { using Error::Error; };
struct NonFiniteLossError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct LengthMismatchError : Error { using Error::Error; };

}  // namespace causalhbm
