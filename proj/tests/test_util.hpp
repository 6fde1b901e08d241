#pragma once

#include <cmath>

#include "pakan/graph.hpp"
#include "pakan/rng.hpp"

namespace testutil {

inline pakan::Tensor random_tensor(pakan::Shape dims, pakan::Rng& rng, double lo = -1.0, double hi = 1.0) {
    pakan::Tensor t(std::move(dims));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline void randomize(pakan::ParamStore& store, pakan::Rng& rng, double bound) {
    for (const auto& e : store.entries()) {
        pakan::Var p = e.second;
        for (auto& v : p.mutable_value().data()) v = rng.uniform(-bound, bound);
    }
}

inline void fill(pakan::Var v, double value) { v.mutable_value().fill(value); }

inline bool all_equal(const pakan::Tensor& t, double v) {
    for (double x : t.data())
        if (x != v) return false;
    return true;
}

}  // namespace testutil
