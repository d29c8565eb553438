#pragma once

#include <string>
#include <vector>

namespace schemacoder {

// Exit codes: 0 success, 2 validation error, 3 pipeline failure.
int cmd_extract(const std::string& config_path);
int cmd_evaluate(const std::string& pred_csv, const std::string& truth_csv,
                 const std::string& report_out = "");
int cmd_report(const std::string& run_dir);

int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace schemacoder
