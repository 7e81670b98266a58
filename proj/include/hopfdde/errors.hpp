#pragma once
#include <stdexcept>
#include <string>

namespace hopfdde {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define HOPFDDE_DEFINE_ERROR(Name)                                            \
    struct Name : Error {                                                      \
        using Error::Error;                                                    \
    }

HOPFDDE_DEFINE_ERROR(NonPositiveParameter);
HOPFDDE_DEFINE_ERROR(ConditionC0Violated);
HOPFDDE_DEFINE_ERROR(OutOfDomain);
HOPFDDE_DEFINE_ERROR(NoHexicDomain);
HOPFDDE_DEFINE_ERROR(NoConvergence);
HOPFDDE_DEFINE_ERROR(ContourTooSmall);
HOPFDDE_DEFINE_ERROR(PositivityViolated);
HOPFDDE_DEFINE_ERROR(StepSizeInvalid);
HOPFDDE_DEFINE_ERROR(SectionNotCrossed);
HOPFDDE_DEFINE_ERROR(OutOfWindow);
HOPFDDE_DEFINE_ERROR(AnchorDegenerate);
HOPFDDE_DEFINE_ERROR(LostAtStart);
HOPFDDE_DEFINE_ERROR(HypothesisNotMet);
HOPFDDE_DEFINE_ERROR(ConditionNotMet);
HOPFDDE_DEFINE_ERROR(SeedNotOnCurve);
HOPFDDE_DEFINE_ERROR(ConfigError);

#undef HOPFDDE_DEFINE_ERROR

} // namespace hopfdde
