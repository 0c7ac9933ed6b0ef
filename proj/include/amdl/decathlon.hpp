#pragma once

#include <string>
#include <vector>

namespace amdl {

// Named domain with its class count and split sizes. Synthetic domains carry
// a difficulty tag; benchmark fixtures leave it empty.
struct DomainSpec {
    std::string name;
    int num_classes = 0;
    int train_size = 0;
    int val_size = 0;
    int test_size = 0;
    std::string difficulty;
};

// The ten Visual Decathlon domains, metadata only.
const std::vector<DomainSpec>& decathlon_fixture();

const DomainSpec* find_domain_spec(const std::string& name);

}  // namespace amdl
