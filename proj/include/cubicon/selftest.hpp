#ifndef CUBICON_SELFTEST_HPP
#define CUBICON_SELFTEST_HPP

#include <string>

namespace cubicon {

struct SelftestResult {
    bool pass = false;
    std::string table; // one line per oracle suite
};

// Embedded oracle suites: invariant sets against brute-force graph search,
// components against an independent flood fill, homology of hand-reduced
// pairs, and the exact-sequence cases.  Pure and deterministic.
SelftestResult run_selftest();

} // namespace cubicon

#endif
