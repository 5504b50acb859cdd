#pragma once

#include <doctest.h>

#include "ecgxai/error.hpp"

// Kind of the ecgxai::Error thrown by f; fails the test if nothing is thrown.
template <class F>
ecgxai::ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const ecgxai::Error& e) {
    return e.kind();
  }
  FAIL("expected an ecgxai::Error");
  return ecgxai::ErrorKind::IoError;
}
