#ifndef TOFNER_TESTS_CHECKS_HPP
#define TOFNER_TESTS_CHECKS_HPP

// doctest-dependent helpers; keep separate from support.hpp so the
// acceptance binary stays framework-free.

#include <doctest.h>

#include <string>

#include "tofner/util.hpp"

namespace testsup {

// Runs fn, requires a tof::Error of the given kind, hands back the message
// so callers can assert on its content.
template <typename Fn>
std::string expect_error(Fn&& fn, tof::ErrorKind kind) {
  try {
    fn();
  } catch (const tof::Error& e) {
    CHECK_MESSAGE(e.kind() == kind, "kind ", tof::error_kind_name(e.kind()), " for: ", e.what());
    return e.what();
  } catch (const std::exception& e) {
    FAIL("wrong exception type: ", e.what());
    return "";
  }
  FAIL("expected an error, none thrown");
  return "";
}

inline bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace testsup

#endif  // TOFNER_TESTS_CHECKS_HPP
