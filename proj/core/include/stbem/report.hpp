// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "stbem/experiment.hpp"

namespace stbem {

inline constexpr const char* kCsvHeader = "scenario,snr_db,block,method,trial,value";

void write_csv(std::ostream& os, const std::vector<MetricRow>& rows);
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows);

// JSON manifest with the resolved config, learned parameters, grouping and pilots.
std::string manifest_json(const Manifest& manifest);

// Hexfloat round trip for bit-exact manifests.
std::string hexfloat(double v);
double parse_hexfloat(const std::string& s);

// JSON config file whose keys mirror SystemConfig and ExperimentSpec. Missing keys keep
// the defaults of `cfg` / `spec`. Throws Error(config).
void load_config(const std::string& path, SystemConfig& cfg, ExperimentSpec& spec);
void apply_config_json(const std::string& text, SystemConfig& cfg, ExperimentSpec& spec);

// "10", "-10:2:20" or "0,5,10". Throws Error(config).
std::vector<double> parse_snr_grid(const std::string& text);

}  // namespace stbem
