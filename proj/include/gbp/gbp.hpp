#pragma once

#include "gbp/bp.hpp"
#include "gbp/calculus.hpp"
#include "gbp/energy.hpp"
#include "gbp/errors.hpp"
#include "gbp/generators.hpp"
#include "gbp/linalg.hpp"
#include "gbp/model_io.hpp"
#include "gbp/mp.hpp"
#include "gbp/oracle.hpp"
#include "gbp/poset.hpp"
#include "gbp/presheaf.hpp"
#include "gbp/rng.hpp"
#include "gbp/transform.hpp"
