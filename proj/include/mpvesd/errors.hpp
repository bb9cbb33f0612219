#pragma once

#include <stdexcept>
#include <string>

namespace mpvesd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MPVESD_DEFINE_ERROR(Name)              \
    class Name : public Error {                \
    public:                                    \
        using Error::Error;                    \
    }

MPVESD_DEFINE_ERROR(NonConvergence);
MPVESD_DEFINE_ERROR(SupportScanFailure);
MPVESD_DEFINE_ERROR(QuantileOutOfRange);
MPVESD_DEFINE_ERROR(DenominatorNearZero);
MPVESD_DEFINE_ERROR(BadSpec);
MPVESD_DEFINE_ERROR(DecompositionFailure);
MPVESD_DEFINE_ERROR(DimensionMismatch);
MPVESD_DEFINE_ERROR(NotNormalized);
MPVESD_DEFINE_ERROR(InsufficientData);
MPVESD_DEFINE_ERROR(SingularSystem);
MPVESD_DEFINE_ERROR(LengthMismatch);
MPVESD_DEFINE_ERROR(ConfigError);

#undef MPVESD_DEFINE_ERROR

} // namespace mpvesd
