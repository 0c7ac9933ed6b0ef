#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "amdl/errors.hpp"

namespace amdl {

// One (configuration, exit) row with per-domain top-1 accuracies in percent.
// `cost` is the ordering key for selection: cumulative parameter count for
// live tables, the exit index for fixture replay (the fixture's own absolute
// parameter figures are not reproduced, only their E1 < E2 < E3 ordering).
struct AccuracyRow {
    std::string config;
    int exit_index = 0;
    double cost = 0;
    std::map<std::string, double> acc;       // percent, missing domain = no entry
    std::map<std::string, int64_t> params;   // optional, live tables only
    std::map<std::string, double> fraction;  // optional, live tables only
};

struct AccuracyTable {
    int num_exits = 0;
    std::vector<std::string> domains;  // presentation order
    std::vector<AccuracyRow> rows;

    void validate() const {
        for (const auto& r : rows) {
            if (r.exit_index < 1 || r.exit_index > num_exits)
                throw ConfigError("accuracy table: exit index " + std::to_string(r.exit_index) + " out of 1.." +
                                  std::to_string(num_exits));
            for (const auto& [dom, a] : r.acc)
                if (a < 0.0 || a > 100.0)
                    throw ConfigError("accuracy table: accuracy " + std::to_string(a) + " for " + dom +
                                      " outside [0,100]");
        }
    }
};

struct SelectionResult {
    std::string domain;
    std::string config;
    int exit_index = 0;
    double accuracy = 0;  // percent
    double baseline = 0;  // best exit-K accuracy, percent
    double loss = 0;      // baseline - accuracy, >= 0
    std::string difficulty;
};

// exit 1 -> easy, exit K -> challenging, anything between -> intermediate.
std::string difficulty_class(int exit_index, int num_exits);

// Earliest-exit rule: baseline is the best exit-K accuracy for the domain;
// candidates are walked in (cost asc, accuracy desc, exit asc, config lex)
// order and the first within `threshold` percent of the baseline wins. If
// nothing qualifies the baseline row itself is returned with loss 0.
SelectionResult select_exit(const AccuracyTable& table, const std::string& domain, double threshold);

struct BestRowResult {
    std::vector<SelectionResult> selections;
    double mean_accuracy = 0;
};

// Selection across every domain of the table. Domains listed in `pinned_to_base`
// bypass selection and use the full base network (exit K at the baseline).
BestRowResult best_row(const AccuracyTable& table, double threshold = 3.5,
                       const std::set<std::string>& pinned_to_base = {"ImNet"});

// Table 2 of the experiment series: seven exit-module configurations by three
// exits, accuracies verbatim. Embedded as a CSV resource.
const char* table2_csv();
AccuracyTable table2_fixture();

// Generic CSV loader for accuracy tables in the fixture layout:
// config,exit,cost,<domain>,... with empty cells for missing entries.
AccuracyTable accuracy_table_from_csv(const std::string& text);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ReportEntry {
    SelectionResult sel;
    int64_t params = 0;
    double param_fraction = 0;
};

// CSV column contract: domain,config,exit,accuracy,baseline,loss,params,param_fraction,difficulty
std::string report_to_csv(const std::vector<ReportEntry>& entries);
std::string report_to_json(const std::vector<ReportEntry>& entries);
void write_report_files(const std::string& csv_path, const std::string& json_path,
                        const std::vector<ReportEntry>& entries);

// ---------------------------------------------------------------------------
// Live results accumulation (written by `evaluate`, read by `select`/`report`)
// ---------------------------------------------------------------------------

struct ResultRecord {
    std::string domain;
    std::string config;
    int exit_index = 0;
    double accuracy = 0;  // percent
    int64_t params = 0;
    double param_fraction = 0;
};

std::string results_csv_header();
std::string result_record_to_csv(const ResultRecord& r);
std::vector<ResultRecord> results_from_csv(const std::string& text);
AccuracyTable table_from_results(const std::vector<ResultRecord>& records);

}  // namespace amdl
