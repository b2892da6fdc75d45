#include <doctest.h>

#include "random_apparatus.hpp"

using namespace qkd;
using namespace qkd::testing;

TEST_SUITE_BEGIN("properties");

TEST_CASE("random apparatus compositions satisfy every invariant") {
  RoundRng gen(20240811, 0);
  int checked = 0;
  for (int i = 0; i < 250; ++i) {
    RandomInstance inst = random_instance(gen);
    std::string failure = check_instance(inst, gen);
    if (!failure.empty()) {
      CAPTURE(i);
      FAIL_CHECK(failure);
    } else {
      ++checked;
    }
  }
  CHECK(checked == 250);
}

TEST_SUITE_END();
