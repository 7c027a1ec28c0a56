#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sgf {

/// Failure classes, mapped to CLI exit codes (0 ok, 2 config, 3 numerical,
/// 4 oracle mismatch).
enum class ErrorClass { Config = 2, Numerical = 3, OracleMismatch = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what)
        : std::runtime_error(what), cls_(cls) {}
    ErrorClass error_class() const { return cls_; }

private:
    ErrorClass cls_;
};

#define SGF_ERROR_TYPE(Name, Cls)                                  \
    class Name : public Error {                                   \
    public:                                                        \
        explicit Name(const std::string& w)                        \
            : Error(ErrorClass::Cls, std::string(#Name ": ") + w) {} \
    };

// geometry
SGF_ERROR_TYPE(NonPositiveDefinite, Numerical)
SGF_ERROR_TYPE(OutOfChart, Numerical)
SGF_ERROR_TYPE(UnsupportedVariant, Numerical)
// flow
SGF_ERROR_TYPE(StepFailure, Numerical)
SGF_ERROR_TYPE(BlowUp, Numerical)
// bvp / action
SGF_ERROR_TYPE(DegenerateTime, Numerical)
SGF_ERROR_TYPE(NoConvergence, Numerical)
SGF_ERROR_TYPE(SingularJacobian, Numerical)
SGF_ERROR_TYPE(ConstraintViolated, Numerical)
// wkb
SGF_ERROR_TYPE(ResonantMode, Numerical)
SGF_ERROR_TYPE(NonHomogeneousInput, Numerical)
// kernel
SGF_ERROR_TYPE(StencilOutOfDomain, Numerical)
SGF_ERROR_TYPE(TruncationTooTight, Numerical)
SGF_ERROR_TYPE(QuadratureFailure, Numerical)
// oracle
SGF_ERROR_TYPE(PathOutOfChart, Numerical)
SGF_ERROR_TYPE(InsufficientSamples, Numerical)
SGF_ERROR_TYPE(OracleMismatch, OracleMismatch)
// cli
SGF_ERROR_TYPE(ConfigError, Config)

#undef SGF_ERROR_TYPE

}  // namespace sgf
