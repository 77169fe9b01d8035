#pragma once

#include <cstdint>
#include <string>

#include "rudi/dataset.hpp"

#include <json.hpp>

namespace rudi {

// Known fixture names: "single-signal", "two-signal", "rule-teacher".
// All fixtures share one schema (type {A,B,C}, channel {web,app}, amount,
// latency) and differ in how the teacher score is generated. `manifest`
// receives the generation parameters (chains, thresholds, noise level).
Dataset make_synthetic(const std::string& name, std::size_t users,
                       std::uint64_t seed, nlohmann::json& manifest);

// Writes schema.json, events.csv, scores.tsv and manifest.json to `out_dir`.
void write_synthetic(const std::string& name, std::size_t users,
                     std::uint64_t seed, const std::string& out_dir);

}  // namespace rudi
