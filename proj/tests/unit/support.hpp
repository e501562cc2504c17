#pragma once

#include <doctest.h>

#include "lensdff/error.hpp"

// Checks that `expr` throws lensdff::Error carrying `expected`.
#define CHECK_ERROR_CODE(expr, expected)                                                  \
  do {                                                                                    \
    bool thrown_ = false;                                                                 \
    try {                                                                                 \
      (void)(expr);                                                                       \
    } catch (const ::lensdff::Error& e_) {                                                \
      thrown_ = true;                                                                     \
      CHECK_MESSAGE(e_.code() == (expected), "got ", ::lensdff::to_string(e_.code()));    \
    }                                                                                     \
    CHECK_MESSAGE(thrown_, "expected ", ::lensdff::to_string(expected));                  \
  } while (false)
