#include <iostream>

#include "infocir/acceptance.hpp"

int main() {
  infocir::AcceptanceOptions options;
  const auto report = infocir::run_acceptance(options);
  for (const auto& c : report.criteria) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " " << c.detail.dump() << "\n";
  }
  std::cout << (report.passed() ? "ALL PASS" : "FAILURES") << "\n";
  return report.passed() ? 0 : 1;
}
