#pragma once

#include <stdexcept>
#include <string>

namespace linkrot {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define LINKROT_DEFINE_ERROR(Name)                                         \
    struct Name : Error {                                                  \
        explicit Name(const std::string& what = #Name) : Error(what) {}    \
    }

LINKROT_DEFINE_ERROR(MalformedUrl);
LINKROT_DEFINE_ERROR(FilteredScheme);
LINKROT_DEFINE_ERROR(MissingField);
LINKROT_DEFINE_ERROR(WidthMismatch);
LINKROT_DEFINE_ERROR(EmptyDataset);
LINKROT_DEFINE_ERROR(TooFewRows);
LINKROT_DEFINE_ERROR(BadK);
LINKROT_DEFINE_ERROR(NonPositiveSigma);
LINKROT_DEFINE_ERROR(BadHyperparameter);
LINKROT_DEFINE_ERROR(DidNotConverge);
LINKROT_DEFINE_ERROR(DegenerateDesign);
LINKROT_DEFINE_ERROR(NullFitFailed);
LINKROT_DEFINE_ERROR(TooManyFailures);
LINKROT_DEFINE_ERROR(BadOptions);
LINKROT_DEFINE_ERROR(EmptyBackground);
LINKROT_DEFINE_ERROR(ArchiveUnreachable);
LINKROT_DEFINE_ERROR(MalformedResponse);
LINKROT_DEFINE_ERROR(IoError);

#undef LINKROT_DEFINE_ERROR

}  // namespace linkrot
