#include <gtest/gtest.h>

#include <cstdio>

namespace {

// One line per test: PASS or FAIL, then the test name.
class VerdictPrinter : public ::testing::EmptyTestEventListener {
  void OnTestEnd(const ::testing::TestInfo& info) override {
    std::printf("%s %s\n", info.result()->Passed() ? "PASS" : "FAIL", info.name());
    std::fflush(stdout);
  }
};

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new VerdictPrinter);
  return RUN_ALL_TESTS();
}
