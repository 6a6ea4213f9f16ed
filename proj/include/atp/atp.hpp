#pragma once

#include "atp/base_distribution.hpp"
#include "atp/bernstein.hpp"
#include "atp/data.hpp"
#include "atp/forecast.hpp"
#include "atp/likelihood.hpp"
#include "atp/model.hpp"
#include "atp/rng.hpp"
#include "atp/serialize.hpp"
#include "atp/trainer.hpp"
#include "atp/uq.hpp"
