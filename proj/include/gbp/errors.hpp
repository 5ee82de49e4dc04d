#pragma once

#include <stdexcept>
#include <string>

namespace gbp {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define GBP_DEFINE_ERROR(Name)                                        \
    struct Name : Error {                                             \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

GBP_DEFINE_ERROR(CycleError);
GBP_DEFINE_ERROR(UnknownElement);
GBP_DEFINE_ERROR(NotComparable);
GBP_DEFINE_ERROR(SearchSpaceTooLarge);
GBP_DEFINE_ERROR(EmptyRegion);
GBP_DEFINE_ERROR(DuplicateRegion);
GBP_DEFINE_ERROR(NegativeFactor);
GBP_DEFINE_ERROR(NonPositiveBelief);
GBP_DEFINE_ERROR(NotNormalized);
GBP_DEFINE_ERROR(AllMassMasked);
GBP_DEFINE_ERROR(PosetMismatch);
GBP_DEFINE_ERROR(NaturalityFailed);
GBP_DEFINE_ERROR(NotSurjective);
GBP_DEFINE_ERROR(NotTree);
GBP_DEFINE_ERROR(ZeroPartition);
GBP_DEFINE_ERROR(ZeroEvidence);
GBP_DEFINE_ERROR(InconsistentEvidence);
GBP_DEFINE_ERROR(Mismatch);
GBP_DEFINE_ERROR(ValidationError);
GBP_DEFINE_ERROR(ParseError);

#undef GBP_DEFINE_ERROR

}  // namespace gbp
