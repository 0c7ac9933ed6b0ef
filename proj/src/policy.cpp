#include "amdl/policy.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "amdl/bytes.hpp"

namespace amdl {

std::string difficulty_class(int exit_index, int num_exits) {
    if (exit_index <= 1) return "easy";
    if (exit_index >= num_exits) return "challenging";
    return "intermediate";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

AccuracyTable accuracy_table_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("accuracy table CSV is empty");
    auto header = split_csv_line(line);
    if (header.size() < 4 || header[0] != "config" || header[1] != "exit" || header[2] != "cost")
        throw ConfigError("accuracy table CSV must start with config,exit,cost,<domains...>");

    AccuracyTable table;
    table.domains.assign(header.begin() + 3, header.end());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ConfigError("accuracy table row has " + std::to_string(cells.size()) + " cells, header has " +
                              std::to_string(header.size()));
        AccuracyRow row;
        row.config = cells[0];
        row.exit_index = std::stoi(cells[1]);
        row.cost = std::stod(cells[2]);
        for (size_t d = 0; d < table.domains.size(); ++d) {
            const std::string& cell = cells[d + 3];
            if (!cell.empty()) row.acc[table.domains[d]] = std::stod(cell);
        }
        table.num_exits = std::max(table.num_exits, row.exit_index);
        table.rows.push_back(std::move(row));
    }
    table.validate();
    return table;
}

SelectionResult select_exit(const AccuracyTable& table, const std::string& domain, double threshold) {
    if (threshold < 0 || threshold > 100) throw ConfigError("select_exit: threshold must be in [0,100]");

    // baseline: best final-exit accuracy for this domain
    const AccuracyRow* baseline_row = nullptr;
    for (const auto& r : table.rows) {
        if (r.exit_index != table.num_exits) continue;
        auto it = r.acc.find(domain);
        if (it == r.acc.end()) continue;
        if (!baseline_row || it->second > baseline_row->acc.at(domain)) baseline_row = &r;
    }
    if (!baseline_row)
        throw ConfigError("select_exit: no exit-" + std::to_string(table.num_exits) + " row for domain '" + domain +
                          "'");
    double baseline = baseline_row->acc.at(domain);

    std::vector<const AccuracyRow*> candidates;
    for (const auto& r : table.rows)
        if (r.acc.count(domain)) candidates.push_back(&r);
    std::sort(candidates.begin(), candidates.end(), [&](const AccuracyRow* a, const AccuracyRow* b) {
        if (a->cost != b->cost) return a->cost < b->cost;
        double aa = a->acc.at(domain), ba = b->acc.at(domain);
        if (aa != ba) return aa > ba;
        if (a->exit_index != b->exit_index) return a->exit_index < b->exit_index;
        return a->config < b->config;
    });

    const AccuracyRow* chosen = nullptr;
    for (const AccuracyRow* r : candidates) {
        if (baseline - r->acc.at(domain) <= threshold) {
            chosen = r;
            break;
        }
    }
    if (!chosen) chosen = baseline_row;  // loss 0 by the definition of the baseline

    SelectionResult sel;
    sel.domain = domain;
    sel.config = chosen->config;
    sel.exit_index = chosen->exit_index;
    sel.accuracy = chosen->acc.at(domain);
    sel.baseline = baseline;
    sel.loss = baseline - sel.accuracy;
    sel.difficulty = difficulty_class(sel.exit_index, table.num_exits);
    return sel;
}

BestRowResult best_row(const AccuracyTable& table, double threshold, const std::set<std::string>& pinned_to_base) {
    BestRowResult out;
    double total = 0;
    for (const auto& domain : table.domains) {
        SelectionResult sel;
        if (pinned_to_base.count(domain)) {
            // the whole base network serves this domain; no adapters, exit K
            double baseline = -1;
            for (const auto& r : table.rows) {
                if (r.exit_index != table.num_exits) continue;
                auto it = r.acc.find(domain);
                if (it != r.acc.end()) baseline = std::max(baseline, it->second);
            }
            if (baseline < 0)
                throw ConfigError("best_row: pinned domain '" + domain + "' has no exit-" +
                                  std::to_string(table.num_exits) + " accuracy");
            sel.domain = domain;
            sel.config = "base";
            sel.exit_index = table.num_exits;
            sel.accuracy = baseline;
            sel.baseline = baseline;
            sel.loss = 0;
            sel.difficulty = difficulty_class(sel.exit_index, table.num_exits);
        } else {
            sel = select_exit(table, domain, threshold);
        }
        total += sel.accuracy;
        out.selections.push_back(std::move(sel));
    }
    out.mean_accuracy = out.selections.empty() ? 0 : total / static_cast<double>(out.selections.size());
    return out;
}

std::string report_to_csv(const std::vector<ReportEntry>& entries) {
    std::string out = "domain,config,exit,accuracy,baseline,loss,params,param_fraction,difficulty\n";
    for (const auto& e : entries) {
        out += e.sel.domain + "," + e.sel.config + "," + std::to_string(e.sel.exit_index) + "," +
               fmt_double(e.sel.accuracy) + "," + fmt_double(e.sel.baseline) + "," + fmt_double(e.sel.loss) + "," +
               std::to_string(e.params) + "," + fmt_double(e.param_fraction) + "," + e.sel.difficulty + "\n";
    }
    return out;
}

std::string report_to_json(const std::vector<ReportEntry>& entries) {
    nlohmann::ordered_json doc;
    doc["report"] = nlohmann::ordered_json::array();
    double total_acc = 0;
    int64_t total_params = 0;
    for (const auto& e : entries) {
        nlohmann::ordered_json row;
        row["domain"] = e.sel.domain;
        row["config"] = e.sel.config;
        row["exit"] = e.sel.exit_index;
        row["accuracy"] = e.sel.accuracy;
        row["baseline"] = e.sel.baseline;
        row["loss"] = e.sel.loss;
        row["params"] = e.params;
        row["param_fraction"] = e.param_fraction;
        row["difficulty"] = e.sel.difficulty;
        doc["report"].push_back(std::move(row));
        total_acc += e.sel.accuracy;
        total_params += e.params;
    }
    doc["aggregate"]["domains"] = entries.size();
    doc["aggregate"]["mean_accuracy"] = entries.empty() ? 0.0 : total_acc / static_cast<double>(entries.size());
    doc["aggregate"]["total_params"] = total_params;
    return doc.dump(2) + "\n";
}

void write_report_files(const std::string& csv_path, const std::string& json_path,
                        const std::vector<ReportEntry>& entries) {
    std::string csv = report_to_csv(entries);
    write_file_bytes(csv_path, std::vector<uint8_t>(csv.begin(), csv.end()));
    std::string json = report_to_json(entries);
    write_file_bytes(json_path, std::vector<uint8_t>(json.begin(), json.end()));
}

std::string results_csv_header() { return "domain,config,exit,accuracy,params,param_fraction\n"; }

std::string result_record_to_csv(const ResultRecord& r) {
    return r.domain + "," + r.config + "," + std::to_string(r.exit_index) + "," + fmt_double(r.accuracy) + "," +
           std::to_string(r.params) + "," + fmt_double(r.param_fraction) + "\n";
}

std::vector<ResultRecord> results_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("results CSV is empty");
    if (line != "domain,config,exit,accuracy,params,param_fraction")
        throw ConfigError("unexpected results CSV header: " + line);
    std::vector<ResultRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 6) throw ConfigError("results CSV row has " + std::to_string(cells.size()) + " cells");
        ResultRecord r;
        r.domain = cells[0];
        r.config = cells[1];
        r.exit_index = std::stoi(cells[2]);
        r.accuracy = std::stod(cells[3]);
        r.params = std::stoll(cells[4]);
        r.param_fraction = std::stod(cells[5]);
        records.push_back(std::move(r));
    }
    return records;
}

AccuracyTable table_from_results(const std::vector<ResultRecord>& records) {
    AccuracyTable table;
    for (const auto& r : records) {
        if (std::find(table.domains.begin(), table.domains.end(), r.domain) == table.domains.end())
            table.domains.push_back(r.domain);
        AccuracyRow* row = nullptr;
        for (auto& existing : table.rows)
            if (existing.config == r.config && existing.exit_index == r.exit_index) row = &existing;
        if (!row) {
            table.rows.emplace_back();
            row = &table.rows.back();
            row->config = r.config;
            row->exit_index = r.exit_index;
            row->cost = static_cast<double>(r.params);
        }
        row->acc[r.domain] = r.accuracy;
        row->params[r.domain] = r.params;
        row->fraction[r.domain] = r.param_fraction;
        table.num_exits = std::max(table.num_exits, r.exit_index);
    }
    table.validate();
    return table;
}

}  // namespace amdl
