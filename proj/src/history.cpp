#include <cstdio>
#include <cstring>
#include <sstream>

#include "amdl/bytes.hpp"
#include "amdl/train.hpp"

namespace amdl {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::joint: return "joint";
        case Strategy::blockwise: return "blockwise";
        case Strategy::exits_only: return "exits_only";
    }
    return "joint";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "joint") return Strategy::joint;
    if (name == "blockwise") return Strategy::blockwise;
    if (name == "exits_only") return Strategy::exits_only;
    throw ConfigError("unknown strategy '" + name + "' (expected joint, blockwise, or exits_only)");
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

// epoch,lr,loss_e1..loss_eK,acc_e1..acc_eK with %.17g values; parses back to
// the same doubles bit for bit.
std::string history_to_csv(const TrainHistory& h) {
    std::string out = "epoch,lr";
    for (int e = 1; e <= h.num_exits; ++e) out += ",loss_e" + std::to_string(e);
    for (int e = 1; e <= h.num_exits; ++e) out += ",acc_e" + std::to_string(e);
    out += "\n";
    for (const auto& row : h.epochs) {
        out += std::to_string(row.epoch) + "," + fmt_double(row.lr);
        for (double v : row.loss) out += "," + fmt_double(v);
        for (double v : row.acc) out += "," + fmt_double(v);
        out += "\n";
    }
    return out;
}

TrainHistory history_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty history CSV", 0);

    int num_exits = 0;
    {
        std::istringstream header(line);
        std::string col;
        while (std::getline(header, col, ','))
            if (col.rfind("loss_e", 0) == 0) ++num_exits;
        if (num_exits == 0) throw FormatError("history CSV header lists no loss columns", 0);
    }

    TrainHistory h;
    h.num_exits = num_exits;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != 2 + 2 * num_exits)
            throw FormatError("history CSV row has " + std::to_string(cells.size()) + " cells", 0);
        TrainHistory::Epoch e;
        e.epoch = std::stoi(cells[0]);
        e.lr = std::stod(cells[1]);
        for (int i = 0; i < num_exits; ++i) e.loss.push_back(std::stod(cells[static_cast<size_t>(2 + i)]));
        for (int i = 0; i < num_exits; ++i)
            e.acc.push_back(std::stod(cells[static_cast<size_t>(2 + num_exits + i)]));
        h.epochs.push_back(std::move(e));
    }
    return h;
}

void write_history_csv(const std::string& path, const TrainHistory& h) {
    std::string text = history_to_csv(h);
    std::vector<uint8_t> bytes(text.begin(), text.end());
    write_file_bytes(path, bytes);
}

TrainHistory read_history_csv(const std::string& path) {
    auto bytes = read_file_bytes(path);
    return history_from_csv(std::string(bytes.begin(), bytes.end()));
}

}  // namespace amdl
