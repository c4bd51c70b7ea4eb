// Acceptance suite: runs every verification suite and prints one line per
// criterion. Exits nonzero if any check fails.

#include <cstdio>
#include <string>
#include <vector>

#include "sdh/verify.hpp"

int main(int argc, char** argv) {
    bool all_passed = true;
    const auto names = argc > 1 ? std::vector<std::string>(argv + 1, argv + argc)
                                : sdh::verify::suite_names();
    for (const auto& name : names) {
        const auto report = sdh::verify::run_suite(name);
        for (const auto& check : report.checks) {
            std::printf("[%s] %s: %s - %s\n", check.passed ? "PASS" : "FAIL",
                        report.suite.c_str(), check.name.c_str(), check.details.c_str());
            all_passed = all_passed && check.passed;
        }
        std::printf("       (%s finished in %.1f s)\n", report.suite.c_str(), report.seconds);
    }
    std::printf("%s\n", all_passed ? "ACCEPTANCE: all criteria passed"
                                   : "ACCEPTANCE: criteria FAILED");
    return all_passed ? 0 : 1;
}
