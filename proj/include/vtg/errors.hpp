#pragma once

#include <stdexcept>
#include <string>

namespace vtg {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define VTG_DEFINE_ERROR(NAME)                      \
    struct NAME : Error {                           \
        using Error::Error;                         \
    }

// core
VTG_DEFINE_ERROR(DimensionMismatch);
VTG_DEFINE_ERROR(EmptyInput);

// feature files / checkpoints
VTG_DEFINE_ERROR(BadMagic);
VTG_DEFINE_ERROR(TruncatedFile);
VTG_DEFINE_ERROR(NonFiniteValue);
VTG_DEFINE_ERROR(ZeroDim);

// manifests
VTG_DEFINE_ERROR(MissingField);
VTG_DEFINE_ERROR(UnresolvedFeatureFile);
VTG_DEFINE_ERROR(GtOutOfRange);

// synthesis
VTG_DEFINE_ERROR(InvalidSpec);

// windowing
VTG_DEFINE_ERROR(InvalidWindowLength);
VTG_DEFINE_ERROR(NoNegativeWindow);

// adapter / scorer
VTG_DEFINE_ERROR(EmptyRange);
VTG_DEFINE_ERROR(InsufficientData);
VTG_DEFINE_ERROR(UnknownWindowIndex);
VTG_DEFINE_ERROR(MalformedLine);

// eval / bench
VTG_DEFINE_ERROR(EmptyQuerySet);
VTG_DEFINE_ERROR(MissingCheckpoint);
VTG_DEFINE_ERROR(InsufficientPoints);

#undef VTG_DEFINE_ERROR

}  // namespace vtg
