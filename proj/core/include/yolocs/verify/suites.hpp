#pragma once

// Named self-check suites shared by the command-line tool and the acceptance
// runner. Each check reports pass/fail plus a short detail string.

#include <string>
#include <vector>

namespace yolocs::verify {

struct SuiteCheck {
    std::string name;
    bool ok = false;
    std::string detail;
};

// Fuzzes the convolution against an order-exact reference and replays frozen
// oracles for the remaining forward kernels. Failures are bit-level.
std::vector<SuiteCheck> kernel_suite(unsigned seed = 1234, int fuzz_cases = 200);

// Central-difference checks of every primitive and every composite block.
std::vector<SuiteCheck> gradient_suite();

// Single-pixel perturbation probes of forward and backward footprints.
std::vector<SuiteCheck> receptive_field_suite();

inline bool all_ok(const std::vector<SuiteCheck>& checks) {
    for (const auto& c : checks)
        if (!c.ok) return false;
    return true;
}

}  // namespace yolocs::verify
