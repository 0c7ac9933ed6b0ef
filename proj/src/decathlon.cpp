#include "amdl/decathlon.hpp"

namespace amdl {

const std::vector<DomainSpec>& decathlon_fixture() {
    static const std::vector<DomainSpec> specs = {
        {"Airc", 100, 3334, 3333, 3333, ""},   {"C100", 100, 40000, 10000, 10000, ""},
        {"DPed", 2, 23520, 5880, 19600, ""},   {"DTD", 47, 1880, 1880, 1880, ""},
        {"GTSRB", 43, 31367, 7842, 12630, ""}, {"ImNet", 1000, 1232167, 49000, 48238, ""},
        {"OGlt", 1623, 19476, 6492, 6492, ""}, {"SVHN", 10, 47217, 26040, 26032, ""},
        {"UCF", 101, 7629, 1908, 3783, ""},    {"Flwr", 102, 1020, 1020, 6149, ""},
    };
    return specs;
}

const DomainSpec* find_domain_spec(const std::string& name) {
    for (const auto& s : decathlon_fixture())
        if (s.name == name) return &s;
    return nullptr;
}

}  // namespace amdl
