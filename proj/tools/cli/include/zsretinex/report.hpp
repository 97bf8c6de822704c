#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "zsretinex/losses.hpp"
#include "zsretinex/pipeline.hpp"

namespace zsretinex::cli {

/// One processed image.
struct ImageRecord {
    std::string input;
    std::string output;
    bool ok = false;
    std::string error;
    std::size_t height = 0;
    std::size_t width = 0;
    double wall_time = 0.0;  // seconds
    LossBreakdown initial;
    LossBreakdown final_loss;
    double luminance_before = 0.0;
    double luminance_after = 0.0;
    EnhanceConfig config;
};

using ReportRecord = std::map<std::string, std::string>;

/// Keys whose values depend on timing rather than on the computation.
bool is_timing_key(const std::string& key);

/// `key=value` lines; doubles are written with 17 significant digits so that
/// they read back exactly.
void write_record(std::ostream& out, const ImageRecord& record);
void write_report(std::ostream& out, const std::vector<ImageRecord>& records);
void write_report(const std::filesystem::path& path, const std::vector<ImageRecord>& records);

/// Splits report text into records at blank lines. Throws
/// std::runtime_error on a line without '='.
std::vector<ReportRecord> parse_report(std::istream& in);
std::vector<ReportRecord> parse_report(const std::filesystem::path& path);

/// Flag-form arguments (`--key value`) recreating the configuration stored
/// in a record's `config.*` entries.
std::vector<std::string> config_args(const ReportRecord& record);

/// `config.*` entries of a configuration, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const EnhanceConfig& config);

std::string format_double(double v);

}  // namespace zsretinex::cli
