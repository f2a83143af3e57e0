#include <catch2/catch_amalgamated.hpp>

#include "pifield/pifield.hpp"

TEST_CASE("placeholder_camera") { REQUIRE(true); }
