#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "proguide/core/random.hpp"
#include "proguide/train/objectives.hpp"

namespace proguide::test_support {

struct DpoInstance {
    ToyPolicy policy;
    ToyPolicy reference;
    DpoBatch batch;
};

// Three contexts with 2-5 candidates each, parameters in [-2, 2), 1-6 items.
inline DpoInstance random_dpo_instance(SeededRng& rng) {
    std::vector<std::vector<double>> theta, ref;
    for (int x = 0; x < 3; ++x) {
        const auto n = static_cast<std::size_t>(2 + rng.below(4));
        std::vector<double> a(n), b(n);
        for (std::size_t y = 0; y < n; ++y) {
            a[y] = rng.unit() * 4.0 - 2.0;
            b[y] = rng.unit() * 4.0 - 2.0;
        }
        theta.push_back(a);
        ref.push_back(b);
    }
    DpoInstance out{ToyPolicy(theta), ToyPolicy(ref), {}};
    out.batch.beta = 0.05 + rng.unit() * 2.0;
    const auto items = 1 + rng.below(6);
    for (std::uint64_t i = 0; i < items; ++i) {
        const auto x = static_cast<std::size_t>(rng.below(3));
        const auto n = theta[x].size();
        const auto w = static_cast<std::size_t>(rng.below(n));
        auto l = static_cast<std::size_t>(rng.below(n - 1));
        if (l >= w) ++l;
        out.batch.items.push_back({x, w, l});
    }
    return out;
}

// Largest entry-wise relative error between the analytic gradient and central
// differences with step h. The denominator is floored at 1e-3 of the largest
// analytic entry so exactly-zero entries compare on an absolute scale.
inline double dpo_grad_fd_error(const DpoInstance& inst, double h) {
    auto grad = dpo_grad(inst.policy, inst.reference, inst.batch);
    double scale = 0.0;
    for (const auto& row : grad) {
        for (double g : row) scale = std::max(scale, std::abs(g));
    }
    double worst = 0.0;
    ToyPolicy probe = inst.policy;
    for (std::size_t x = 0; x < grad.size(); ++x) {
        for (std::size_t y = 0; y < grad[x].size(); ++y) {
            const double saved = probe.theta(x, y);
            probe.theta(x, y) = saved + h;
            const double up = dpo_loss(probe, inst.reference, inst.batch);
            probe.theta(x, y) = saved - h;
            const double down = dpo_loss(probe, inst.reference, inst.batch);
            probe.theta(x, y) = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(grad[x][y]), std::abs(numeric), 1e-3 * scale, 1e-12});
            worst = std::max(worst, std::abs(grad[x][y] - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace proguide::test_support
