#pragma once

#include "lift/collect.hpp"
#include "lift/commands.hpp"
#include "lift/config.hpp"
#include "lift/core.hpp"
#include "lift/dataset_io.hpp"
#include "lift/distortions.hpp"
#include "lift/environment.hpp"
#include "lift/knn_q.hpp"
#include "lift/metrics.hpp"
#include "lift/policies.hpp"
#include "lift/rng.hpp"
#include "lift/shortcuts.hpp"
#include "lift/verify.hpp"
