#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zsretinex/pipeline.hpp"

namespace zsretinex::cli {

/// What to process and how.
struct Plan {
    std::filesystem::path input;   // image file or directory
    std::filesystem::path output;  // directory for the written PNGs
    std::optional<std::filesystem::path> report;
    EnhanceConfig config;
    unsigned jobs = 1;
};

/// Result of argument parsing: either a plan, or an exit code with the text
/// to print (usage text or an error).
struct ParseResult {
    std::optional<Plan> plan;
    int exit_code = 0;
    std::string message;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Parses arguments (without the program name). Values from `--config` are
/// applied first, so explicit flags override them.
ParseResult parse_args(const std::vector<std::string>& args);

/// Reads a `key = value` file into flag form (`--key value`). Keys are the
/// long flag names; underscores are accepted in place of dashes.
std::vector<std::string> config_file_args(const std::filesystem::path& path);

/// Images under `input` in processing order: the file itself, or the PNG and
/// JPEG files of a directory sorted by path.
std::vector<std::filesystem::path> collect_inputs(const std::filesystem::path& input);

/// Output file names for one input; pure functions of the input name.
std::filesystem::path enhanced_path(const std::filesystem::path& output_dir, const std::filesystem::path& input);
std::vector<std::filesystem::path> intermediate_paths(const std::filesystem::path& output_dir,
                                                      const std::filesystem::path& input);

/// Enhances every input, writes the report and returns the exit code.
int run(const Plan& plan, std::ostream& log);

/// Full command-line behavior: parse, then run.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zsretinex::cli
