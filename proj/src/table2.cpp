#include "amdl/policy.hpp"

namespace amdl {

// Per-exit top-1 accuracies of the seven exit-module configurations on the
// ten Visual Decathlon domains, transcribed verbatim. The base network serves
// the ImNet column, so only exit 3 carries a value there. The cost column
// records the exit ordering (cumulative cost grows with the exit index); the
// published absolute parameter figures are intentionally not carried here.
const char* table2_csv() {
    return R"(config,exit,cost,ImNet,Airc,C100,DPed,DTD,GTSR,Flwr,OGlt,SVHN,UCF
No-adp,1,1,,10.12,25.97,66.58,24.74,41.18,33.03,41.34,27.39,14.99
No-adp,2,2,,7.30,20.08,64.64,17.88,29.55,21.18,49.12,25.05,11.48
No-adp,3,3,60.32,4.33,9.25,63.52,11.71,19.02,10.61,21.67,20.84,6.96
Basic,1,1,,16.30,53.85,87.05,39.26,96.28,47.87,81.79,89.72,31.09
Basic,2,2,,42.55,72.20,89.86,48.20,97.88,56.31,87.13,95.35,43.30
Basic,3,3,60.32,46.18,78.00,89.84,49.53,97.86,59.19,87.41,96.06,46.95
MLP128,1,1,,24.07,53.65,87.33,43.73,97.00,54.18,80.95,90.04,30.19
MLP128,2,2,,45.04,71.85,90.80,49.15,98.52,63.14,86.44,95.24,43.12
MLP128,3,3,60.32,49.36,78.55,90.93,49.90,98.86,68.06,88.32,96.21,48.64
MLP128-B,1,1,,23.23,56.90,87.72,39.85,95.77,46.32,80.71,90.16,33.15
MLP128-B,2,2,,43.63,71.88,89.74,47.56,96.87,58.42,85.70,95.02,43.33
MLP128-B,3,3,60.32,50.29,81.01,90.57,51.65,99.02,70.24,87.42,95.84,48.01
MLP512,1,1,,24.40,54.60,87.08,40.64,95.81,53.67,80.97,87.25,31.96
MLP512,2,2,,45.37,71.67,90.78,47.40,97.78,61.87,86.46,95.30,44.20
MLP512,3,3,60.32,50.32,78.18,90.93,48.73,97.78,64.73,87.78,96.28,46.90
MLP-2L,1,1,,23.17,53.04,86.86,41.07,95.54,53.93,74.62,87.67,30.06
MLP-2L,2,2,,44.74,70.49,90.46,47.98,96.88,63.97,83.80,94.78,42.64
MLP-2L,3,3,60.32,50.62,77.94,90.68,48.78,97.46,69.85,88.34,96.06,49.04
CL,1,1,,23.47,52.55,86.56,41.18,96.16,51.66,80.79,88.60,30.91
CL,2,2,,43.21,71.34,89.89,49.53,97.76,59.53,86.20,95.04,43.33
CL,3,3,60.32,47.74,77.50,90.14,49.10,97.81,63.23,87.94,96.16,47.11
)";
}

AccuracyTable table2_fixture() { return accuracy_table_from_csv(table2_csv()); }

}  // namespace amdl
