#include <algorithm>

#include "cmls/verify.hpp"

namespace cmls::verify {

bool SuiteResult::passed() const { return !checks.empty() && num_failed() == 0; }

int SuiteResult::num_failed() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; }));
}

void SuiteResult::add(std::string check, bool ok, std::string detail) {
  checks.push_back({std::move(check), ok, std::move(detail)});
}

}  // namespace cmls::verify
