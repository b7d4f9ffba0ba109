// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "stbem/experiment.hpp"

namespace stbem::detail {

struct RunPlan {
    ExperimentSpec spec;
    SystemConfig cfg;
    BemConfig bem;
    double q_truth = 0.0;

    // Downlink frame: kappa = M (mu_dl + 1) slots spanning one uplink block.
    SystemConfig dl_cfg;
    BemConfig bem_dl;
    int kappa = 0;
    std::vector<PilotBook> dl_books;  // one per pilot divisor
    std::optional<PilotBook> ls_book;

    Manifest manifest;
};

RunPlan make_plan(const ExperimentSpec& spec, const SystemConfig& cfg);

struct TrialOutput {
    std::vector<MetricRow> rows;
    TrialRecord record;
};

TrialOutput run_trial(const RunPlan& plan, int trial);
std::vector<TraceRow> trace_trial(const RunPlan& plan, int trial);

}  // namespace stbem::detail
