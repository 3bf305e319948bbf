#include <gtest/gtest.h>

#include "properties.hpp"

namespace props = lmspde::props;

#define PROPERTY_TEST(fn) \
  TEST(Properties, fn) {  \
    const auto c = props::fn(); \
    EXPECT_TRUE(c.ok) << c.name << ": " << c.detail; \
  }

PROPERTY_TEST(kernel_parity)
PROPERTY_TEST(kernel_derivatives)
PROPERTY_TEST(kernel_support)
PROPERTY_TEST(simulator_determinism)
PROPERTY_TEST(simulator_boundary)
PROPERTY_TEST(simulator_linearity)
PROPERTY_TEST(simulator_heat_oracle)
PROPERTY_TEST(ito_telescoping)
PROPERTY_TEST(ito_convergence_order)
PROPERTY_TEST(weight_scale_invariance)
PROPERTY_TEST(projection_extension)
