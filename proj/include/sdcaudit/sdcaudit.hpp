#pragma once

#include "sdcaudit/attack_attribute.hpp"
#include "sdcaudit/attack_membership.hpp"
#include "sdcaudit/csv.hpp"
#include "sdcaudit/data.hpp"
#include "sdcaudit/error.hpp"
#include "sdcaudit/hyperparameters.hpp"
#include "sdcaudit/matrix.hpp"
#include "sdcaudit/metrics.hpp"
#include "sdcaudit/models.hpp"
#include "sdcaudit/numfmt.hpp"
#include "sdcaudit/predictions.hpp"
#include "sdcaudit/random.hpp"
#include "sdcaudit/release.hpp"
#include "sdcaudit/report.hpp"
#include "sdcaudit/safecheck.hpp"
