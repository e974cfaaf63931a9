#include "doctest.h"

#include "pipeline.hpp"

using namespace exinv;
using namespace exinv::testing;

TEST_CASE("every recovered certificate is exact") {
    FuzzTally t = fuzz_pipeline(200, 2024);
    MESSAGE("exact certificates returned: " << t.returned << " of " << t.runs);
    for (const auto& m : t.failing_models) MESSAGE("failing model:\n" << m);
    CHECK(t.runs == 200);
    CHECK(t.failures == 0);
    CHECK(t.returned > 0);
}
