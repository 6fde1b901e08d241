#include <gtest/gtest.h>

#include <chrono>
#include <set>

#include "pakan/gradcheck.hpp"
#include "test_util.hpp"

using namespace pakan;

TEST(Gradcheck, DetectsAWrongRule) {
    // a deliberately broken backward: reports twice the true gradient
    Rng rng(90);
    Var x = Var::leaf(testutil::random_tensor({5}, rng));
    auto loss = [&] {
        Var y = record(Tensor(x.value()), {x}, [x](Node& n) {
            Tensor g = n.grad;
            for (auto& v : g.data()) v *= 2.0;
            accumulate_grad(x.node(), g);
        });
        return sum(mul(y, y));
    };
    EXPECT_FALSE(gradcheck("broken", loss, {x}, 0).passed);
    EXPECT_TRUE(gradcheck("square", [&] { return sum(mul(x, x)); }, {x}, 0).passed);
}

TEST(Gradcheck, SuitePassesEveryOperator) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = run_gradcheck_suite(0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::set<std::string> names;
    for (const auto& r : results) {
        names.insert(r.name);
        EXPECT_TRUE(r.passed) << r.name << " rel err " << r.max_rel_error;
        EXPECT_LT(r.max_rel_error, kGradcheckTolerance) << r.name;
        EXPECT_GT(r.checked, 0u) << r.name;
    }
    EXPECT_EQ(names.size(), results.size());
    EXPECT_LT(secs, 60.0);
}
