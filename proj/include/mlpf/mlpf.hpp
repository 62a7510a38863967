#pragma once

#include "mlpf/random.hpp"
#include "mlpf/models.hpp"
#include "mlpf/dynamics.hpp"
#include "mlpf/resampling.hpp"
#include "mlpf/filtering.hpp"
#include "mlpf/girsanov.hpp"
#include "mlpf/hierarchy.hpp"
#include "mlpf/reference.hpp"
#include "mlpf/harness/config.hpp"
#include "mlpf/harness/csv.hpp"
#include "mlpf/harness/data.hpp"
#include "mlpf/harness/json_io.hpp"
#include "mlpf/harness/parallel.hpp"
#include "mlpf/harness/records.hpp"
#include "mlpf/harness/study.hpp"
