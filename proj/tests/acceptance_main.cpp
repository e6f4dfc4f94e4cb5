// Acceptance suite: runs every criterion and prints one pass/fail line each.
#include <iostream>

#include "fairflip/verify.hpp"

int main() {
    bool ok = fairflip::verify::run_and_report(std::cout, 2);
    return ok ? 0 : 1;
}
