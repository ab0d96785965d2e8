#pragma once

#include "geoxray/core.hpp"
#include "geoxray/manifold.hpp"
#include "geoxray/convexity.hpp"
#include "geoxray/transport.hpp"
#include "geoxray/collar.hpp"
#include "geoxray/xray.hpp"
#include "geoxray/normal_op.hpp"
#include "geoxray/inversion.hpp"
#include "geoxray/applications.hpp"
#include "geoxray/io.hpp"
