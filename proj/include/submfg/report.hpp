#pragma once

// Serialization of run artifacts: structured reports as JSON documents with
// stable field ordering, iteration logs as JSON lines, numeric tables as CSV
// with fixed formatting so identical runs produce identical bytes.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "submfg/checks.hpp"
#include "submfg/equilibrium.hpp"
#include "submfg/hamiltonian.hpp"
#include "submfg/lattice_verify.hpp"
#include "submfg/meanfield.hpp"
#include "submfg/model.hpp"

namespace submfg {

using ojson = nlohmann::ordered_json;

const char* version_string();
const char* build_hash();

/// 16 hex digits, zero padded; the form every artifact uses for the plan id.
std::string fingerprint_hex(std::uint64_t fp);

/// Shortest round-trip decimal for a double ("%.17g" trimmed via "%.12g"
/// first); every numeric cell in CSV artifacts goes through this.
std::string format_number(double v);

ojson to_json(const ProbeWitness& w);
ojson to_json(const CheckResult& c);
ojson to_json(const AssumptionReport& r);
ojson to_json(const RegularityReport& r);
ojson to_json(const ConditionViolation& v);
ojson to_json(const LqBuildReport& r);
ojson to_json(const DominanceReport& r);
ojson to_json(const LatticeReport& r);
ojson to_json(const MonotonicityProbeReport& r);
ojson to_json(const IterationStats& s);
ojson to_json(const ComparisonReport& r);

/// Run metadata without the bundles; stop reasons and directions by name.
ojson run_to_json(const EquilibriumRun& run);

const char* direction_name(Direction d);
const char* stop_reason_name(StopReason s);

/// CSV with header iter,distance,violation,w2_start,w2_mid,w2_end,
/// picard_iters; wall time deliberately stays out (it goes to the JSONL log)
/// so reruns are byte-identical.
void write_history_csv(const std::string& path,
                       const std::vector<IterationStats>& history);

/// One compact JSON object per line, wall time included.
void write_history_jsonl(const std::string& path,
                         const std::vector<IterationStats>& history);

/// Arbitrary small table: header row then one row per entry, cells through
/// format_number.
void write_table_csv(const std::string& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows);
void write_table_csv(const std::string& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

void write_json_file(const std::string& path, const ojson& doc);

}  // namespace submfg
