#pragma once
#include <stdexcept>
#include <string>

namespace rflab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateMetricError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct HorizonError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct HypothesisError : Error { using Error::Error; };
struct ResolutionError : Error { using Error::Error; };
struct StencilError : Error { using Error::Error; };

}  // namespace rflab
