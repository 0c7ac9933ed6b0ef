#pragma once

#include <array>
#include <cstdio>
#include <string>

// Spawns the amdl binary (path injected by the build) and captures stdout+stderr.
namespace testsup {

struct CliResult {
    int exit_code;
    std::string output;
};

inline CliResult run_cli(const std::string& args) {
    std::string cmd = std::string(AMDL_CLI_PATH) + " " + args + " 2>&1";
    std::FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, "popen failed"};
    std::string out;
    std::array<char, 4096> buf;
    size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    int status = pclose(pipe);
    int code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    return {code, out};
}

}  // namespace testsup
