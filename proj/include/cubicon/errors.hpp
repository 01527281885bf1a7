#ifndef CUBICON_ERRORS_HPP
#define CUBICON_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cubicon {

// Base class for all library errors. Every concrete error carries a
// stable name() so the C API can map exceptions to status codes.
class Error : public std::runtime_error {
public:
    explicit Error(std::string what) : std::runtime_error(std::move(what)) {}
    virtual const char* name() const noexcept { return "Error"; }
};

#define CUBICON_DEFINE_ERROR(Cls)                                          \
    class Cls : public Error {                                             \
    public:                                                                \
        explicit Cls(std::string what) : Error(std::move(what)) {}         \
        const char* name() const noexcept override { return #Cls; }        \
    }

CUBICON_DEFINE_ERROR(ConfigError);        // malformed config / bad parameter
CUBICON_DEFINE_ERROR(GridMismatch);       // cell sets from different grids combined
CUBICON_DEFINE_ERROR(EmptySet);           // operation requires a nonempty set
CUBICON_DEFINE_ERROR(NonFiniteState);     // vector field produced NaN/inf
CUBICON_DEFINE_ERROR(StepUnderflow);      // adaptive step fell below the minimum
CUBICON_DEFINE_ERROR(NotTrapping);        // grid box boundary does not map inward
CUBICON_DEFINE_ERROR(NotIsolated);        // invariant set touches its neighborhood boundary
CUBICON_DEFINE_ERROR(InvalidPair);        // exit set not contained in N
CUBICON_DEFINE_ERROR(ValidationFailed);   // numeric validation of a bound failed
CUBICON_DEFINE_ERROR(ContinuationBroken); // isolation unrecoverable along a parameter sweep
CUBICON_DEFINE_ERROR(IoError);            // file read/write failure
CUBICON_DEFINE_ERROR(ParseError);         // expression / file format parse failure

#undef CUBICON_DEFINE_ERROR

} // namespace cubicon

#endif
