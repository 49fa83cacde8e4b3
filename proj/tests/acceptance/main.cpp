// Runs the acceptance criteria and prints one PASS/FAIL line for each.
// Usage: acceptance [ID...]   (default: all)
#include <iostream>
#include <string>
#include <vector>

#include "acceptance/suite.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> ids(argv + 1, argv + argc);
  try {
    auto results = tlra::acceptance::run_suite(ids);
    int failed = 0;
    for (const auto& r : results) failed += !r.pass;
    std::cout << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size() << " criteria passed\n";
    return failed ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 2;
  }
}
