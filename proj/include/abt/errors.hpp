#pragma once

#include <stdexcept>
#include <string>

namespace abt {

// Base class for all errors thrown by the library. Every failure mode has a
// distinct type so callers (and tests) can catch exactly what they expect.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define ABT_ERROR_TYPE(Name)                                        \
    struct Name : Error {                                           \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

// tensor engine
ABT_ERROR_TYPE(ShapeMismatch);
ABT_ERROR_TYPE(InvalidHyperparam);
ABT_ERROR_TYPE(NotScalar);
ABT_ERROR_TYPE(GraphConsumed);

// phantom
ABT_ERROR_TYPE(InvalidDims);
ABT_ERROR_TYPE(InvalidProportions);

// preprocess
ABT_ERROR_TYPE(NoQualifyingFrames);
ABT_ERROR_TYPE(EmptyMask);
ABT_ERROR_TYPE(SingularTransform);

// train
ABT_ERROR_TYPE(StratumTooSmall);
ABT_ERROR_TYPE(NonFiniteLoss);

// eval
ABT_ERROR_TYPE(InvalidRange);
ABT_ERROR_TYPE(DegenerateData);
ABT_ERROR_TYPE(MissingSubjectData);

// io / cli
ABT_ERROR_TYPE(BadMagic);
ABT_ERROR_TYPE(TruncatedPayload);
ABT_ERROR_TYPE(HeaderMismatch);
ABT_ERROR_TYPE(InvalidWindow);
ABT_ERROR_TYPE(UnknownCommand);
ABT_ERROR_TYPE(ConfigParseError);

#undef ABT_ERROR_TYPE

}  // namespace abt
