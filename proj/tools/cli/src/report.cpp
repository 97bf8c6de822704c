#include "zsretinex/report.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace zsretinex::cli {

namespace {

void put(std::ostream& out, const std::string& key, const std::string& value) { out << key << '=' << value << '\n'; }

void put_losses(std::ostream& out, const std::string& prefix, const LossBreakdown& b) {
    put(out, prefix + ".recon", format_double(b.recon));
    put(out, prefix + ".illum_smooth", format_double(b.illum_smooth));
    put(out, prefix + ".refl_smooth", format_double(b.refl_smooth));
    put(out, prefix + ".color", format_double(b.color));
    put(out, prefix + ".region", format_double(b.region));
    put(out, prefix + ".maxa", format_double(b.maxa));
    put(out, prefix + ".noise", format_double(b.noise));
    put(out, prefix + ".total", format_double(b.total));
}

// Record values are single lines.
std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool is_timing_key(const std::string& key) { return key == "wall_time_s"; }

std::vector<std::pair<std::string, std::string>> config_entries(const EnhanceConfig& c) {
    const LossWeights& w = c.losses;
    return {
        {"gamma", format_double(c.gamma)},
        {"iters", std::to_string(c.iterations)},
        {"lr", format_double(c.adam.lr)},
        {"beta1", format_double(c.adam.beta1)},
        {"beta2", format_double(c.adam.beta2)},
        {"adam-eps", format_double(c.adam.eps)},
        {"seed", std::to_string(c.net.seed)},
        {"lambda-i", format_double(w.lambda_i)},
        {"lambda-k", format_double(w.lambda_k)},
        {"lambda-n", format_double(w.lambda_n)},
        {"lambda-rs", format_double(w.lambda_rs)},
        {"lambda-recon", format_double(w.lambda_recon)},
        {"lambda-color", format_double(w.lambda_color)},
        {"lambda-region", format_double(w.lambda_region)},
        {"lambda-maxa", format_double(w.lambda_maxa)},
        {"reduction", w.reduction == Reduction::sum ? "sum" : "mean"},
        {"r-depth", std::to_string(c.net.r_depth)},
        {"i-depth", std::to_string(c.net.i_depth)},
        {"n-depth", std::to_string(c.net.n_depth)},
        {"width", std::to_string(c.net.width)},
        {"dump-intermediates", c.dump_intermediates ? "true" : "false"},
        {"delta", format_double(c.delta)},
    };
}

void write_record(std::ostream& out, const ImageRecord& r) {
    put(out, "input", one_line(r.input));
    put(out, "output", one_line(r.output));
    put(out, "status", r.ok ? "ok" : "failed");
    if (!r.ok) put(out, "error", one_line(r.error));
    put(out, "height", std::to_string(r.height));
    put(out, "width", std::to_string(r.width));
    put(out, "wall_time_s", format_double(r.wall_time));
    put(out, "seed", std::to_string(r.config.net.seed));
    if (r.ok) {
        put_losses(out, "loss.initial", r.initial);
        put_losses(out, "loss.final", r.final_loss);
        put(out, "luminance.before", format_double(r.luminance_before));
        put(out, "luminance.after", format_double(r.luminance_after));
        if (r.config.dump_intermediates) put(out, "noise_map_encoding", "(N+1)/2");
    }
    for (const auto& [key, value] : config_entries(r.config)) put(out, "config." + key, value);
}

void write_report(std::ostream& out, const std::vector<ImageRecord>& records) {
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i) out << '\n';
        write_record(out, records[i]);
    }
}

void write_report(const std::filesystem::path& path, const std::vector<ImageRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report " + path.string());
    write_report(out, records);
    if (!out) throw std::runtime_error("failed writing report " + path.string());
}

std::vector<ReportRecord> parse_report(std::istream& in) {
    std::vector<ReportRecord> records;
    ReportRecord current;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            if (!current.empty()) records.push_back(std::move(current));
            current.clear();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw std::runtime_error("report line " + std::to_string(line_no) + " is not key=value");
        }
        current[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!current.empty()) records.push_back(std::move(current));
    return records;
}

std::vector<ReportRecord> parse_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read report " + path.string());
    return parse_report(in);
}

std::vector<std::string> config_args(const ReportRecord& record) {
    std::vector<std::string> args;
    const std::string prefix = "config.";
    for (const auto& [key, value] : record) {
        if (key.compare(0, prefix.size(), prefix) != 0) continue;
        const std::string flag = "--" + key.substr(prefix.size());
        if (flag == "--dump-intermediates") {
            if (value == "true") args.push_back(flag);
            continue;
        }
        args.push_back(flag);
        args.push_back(value);
    }
    return args;
}

}  // namespace zsretinex::cli
