#include "zsretinex/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "zsretinex/imageio.hpp"
#include "zsretinex/report.hpp"

namespace zsretinex::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool is_image_file(const fs::path& p) {
    const std::string ext = lower(p.extension().string());
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Finds the value of --config in raw arguments, if present.
std::optional<std::string> config_path_in(const std::vector<std::string>& args) {
    std::optional<std::string> found;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            found = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            found = args[i].substr(9);
        }
    }
    return found;
}

void build_app(CLI::App& app, Plan& plan, std::string& reduction, std::string& config_file) {
    EnhanceConfig& c = plan.config;
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.add_option("--input", plan.input, "Image file or directory of PNG/JPEG images")->required();
    app.add_option("--output", plan.output, "Directory for the output PNGs")->capture_default_str();
    app.add_option("--report", plan.report, "Write a key=value run report to this path");
    app.add_option("--config", config_file, "key = value file; explicit flags override it");
    app.add_flag("--dump-intermediates", c.dump_intermediates, "Also write the R, I, N and adjusted I maps");
    app.add_option("--jobs", plan.jobs, "Images processed in parallel")->check(CLI::PositiveNumber);

    app.add_option("--gamma", c.gamma, "Illumination gamma, in (0, 1]")->capture_default_str();
    app.add_option("--iters", c.iterations, "Optimization iterations per image")->capture_default_str();
    app.add_option("--lr", c.adam.lr, "Adam learning rate")->capture_default_str();
    app.add_option("--beta1", c.adam.beta1, "Adam first-moment decay")->capture_default_str();
    app.add_option("--beta2", c.adam.beta2, "Adam second-moment decay")->capture_default_str();
    app.add_option("--adam-eps", c.adam.eps, "Adam denominator epsilon")->capture_default_str();
    app.add_option("--seed", c.net.seed, "Network initialization seed")->capture_default_str();

    LossWeights& w = c.losses;
    app.add_option("--lambda-i", w.lambda_i, "Illumination smoothness weight")->capture_default_str();
    app.add_option("--lambda-k", w.lambda_k, "Reflectance smoothness weight")->capture_default_str();
    app.add_option("--lambda-n", w.lambda_n, "Noise weight")->capture_default_str();
    app.add_option("--lambda-rs", w.lambda_rs, "Fidelity weight inside the reflectance term")->capture_default_str();
    app.add_option("--lambda-recon", w.lambda_recon, "Reconstruction weight (0 disables)")->capture_default_str();
    app.add_option("--lambda-color", w.lambda_color, "Color weight (0 disables)")->capture_default_str();
    app.add_option("--lambda-region", w.lambda_region, "Region weight (0 disables)")->capture_default_str();
    app.add_option("--lambda-maxa", w.lambda_maxa, "Max-channel weight (0 disables)")->capture_default_str();
    app.add_option("--reduction", reduction, "Reduction of the L1 terms")
        ->check(CLI::IsMember({"sum", "mean"}))
        ->capture_default_str();
    app.add_option("--delta", c.delta, "Accepted for compatibility; unused")->capture_default_str();

    app.add_option("--r-depth", c.net.r_depth, "Reflectance network conv layers")->capture_default_str();
    app.add_option("--i-depth", c.net.i_depth, "Illumination network conv layers")->capture_default_str();
    app.add_option("--n-depth", c.net.n_depth, "Noise network conv blocks")->capture_default_str();
    app.add_option("--width", c.net.width, "Feature channels per layer")->capture_default_str();
}

struct ImageJob {
    fs::path input;
    std::string collision;  // non-empty when another input already maps to the same output
};

ImageRecord process(const ImageJob& job, const Plan& plan) {
    ImageRecord rec;
    rec.input = job.input.string();
    rec.output = enhanced_path(plan.output, job.input).string();
    rec.config = plan.config;
    const auto start = std::chrono::steady_clock::now();
    try {
        if (!job.collision.empty()) throw std::runtime_error("output name collides with " + job.collision);
        const Tensor s0 = load_image(job.input);
        rec.height = s0.height();
        rec.width = s0.width();
        const EnhanceResult r = enhance(s0, plan.config);
        save_image(r.enhanced, rec.output);
        if (plan.config.dump_intermediates) {
            const auto paths = intermediate_paths(plan.output, job.input);
            const DecompositionResult& d = r.decomposition;
            Tensor noise_map(d.noise.shape());
            for (std::size_t i = 0; i < noise_map.numel(); ++i) noise_map[i] = (d.noise[i] + 1.0) / 2.0;
            save_image(d.reflectance, paths[0]);
            save_image(d.illumination, paths[1]);
            save_image(noise_map, paths[2]);
            save_image(r.adjusted_illumination, paths[3]);
        }
        rec.initial = r.decomposition.loss_trace.front();
        rec.final_loss = r.decomposition.loss_trace.back();
        double before = 0.0;
        double after = 0.0;
        for (double v : s0.values()) before += v;
        for (double v : r.enhanced.values()) after += v;
        rec.luminance_before = before / static_cast<double>(s0.numel());
        rec.luminance_after = after / static_cast<double>(r.enhanced.numel());
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

}  // namespace

std::vector<std::string> config_file_args(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path.string());
    std::vector<std::string> args;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        std::replace(key.begin(), key.end(), '_', '-');
        if (key.empty() || key == "config") {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": invalid key");
        }
        if (key == "dump-intermediates") {
            const std::string v = lower(value);
            if (v == "true" || v == "1" || v == "yes") {
                args.push_back("--" + key);
            } else if (v != "false" && v != "0" && v != "no") {
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected true or false");
            }
            continue;
        }
        args.push_back("--" + key);
        args.push_back(value);
    }
    return args;
}

ParseResult parse_args(const std::vector<std::string>& args) {
    Plan plan;
    plan.output = ".";
    std::string reduction = plan.config.losses.reduction == Reduction::sum ? "sum" : "mean";
    std::string config_file;
    CLI::App app{"Zero-shot Retinex low-light image enhancement", "zsretinex-enhance"};
    build_app(app, plan, reduction, config_file);

    ParseResult result;
    if (args.empty()) {
        result.exit_code = kExitUsage;
        result.message = app.help();
        return result;
    }

    std::vector<std::string> full;
    try {
        if (const auto cfg = config_path_in(args)) full = config_file_args(*cfg);
    } catch (const std::exception& e) {
        result.exit_code = kExitUsage;
        result.message = std::string("error: ") + e.what() + "\n";
        return result;
    }
    full.insert(full.end(), args.begin(), args.end());
    std::reverse(full.begin(), full.end());

    try {
        app.parse(full);
    } catch (const CLI::CallForHelp&) {
        result.exit_code = kExitOk;
        result.message = app.help();
        return result;
    } catch (const CLI::ParseError& e) {
        result.exit_code = kExitUsage;
        result.message = "error: " + std::string(e.what()) + "\n\n" + app.help();
        return result;
    }

    plan.config.losses.reduction = reduction == "sum" ? Reduction::sum : Reduction::mean;
    try {
        plan.config.validate();
    } catch (const std::exception& e) {
        result.exit_code = kExitUsage;
        result.message = std::string("error: ") + e.what() + "\n";
        return result;
    }
    if (!fs::exists(plan.input)) {
        result.exit_code = kExitUsage;
        result.message = "error: input " + plan.input.string() + " does not exist\n";
        return result;
    }
    result.plan = std::move(plan);
    return result;
}

std::vector<fs::path> collect_inputs(const fs::path& input) {
    if (!fs::is_directory(input)) return {input};
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(input)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

fs::path enhanced_path(const fs::path& output_dir, const fs::path& input) {
    return output_dir / (input.stem().string() + "_enhanced.png");
}

std::vector<fs::path> intermediate_paths(const fs::path& output_dir, const fs::path& input) {
    const std::string stem = input.stem().string();
    return {output_dir / (stem + "_R.png"), output_dir / (stem + "_I.png"), output_dir / (stem + "_N.png"),
            output_dir / (stem + "_Iadj.png")};
}

int run(const Plan& plan, std::ostream& log) {
    const std::vector<fs::path> inputs = collect_inputs(plan.input);
    if (inputs.empty()) {
        log << "no PNG or JPEG images in " << plan.input.string() << '\n';
        if (plan.report) write_report(*plan.report, {});
        return kExitFailure;
    }
    fs::create_directories(plan.output);

    std::vector<ImageJob> jobs;
    std::map<fs::path, fs::path> owners;
    for (const fs::path& in : inputs) {
        ImageJob job{in, {}};
        const auto [it, fresh] = owners.emplace(enhanced_path(plan.output, in), in);
        if (!fresh) job.collision = it->second.string();
        jobs.push_back(std::move(job));
    }

    std::vector<ImageRecord> records(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            records[i] = process(jobs[i], plan);
            const ImageRecord& r = records[i];
            std::lock_guard lock(log_mutex);
            log << '[' << i + 1 << '/' << jobs.size() << "] " << r.input;
            if (r.ok) {
                log << ": " << r.width << 'x' << r.height << ", " << format_double(r.wall_time) << " s, recon "
                    << r.initial.recon << " -> " << r.final_loss.recon << '\n';
            } else {
                log << ": failed: " << r.error << '\n';
            }
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(plan.jobs, static_cast<unsigned>(jobs.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();

    if (plan.report) write_report(*plan.report, records);
    const bool all_ok = std::all_of(records.begin(), records.end(), [](const ImageRecord& r) { return r.ok; });
    return all_ok ? kExitOk : kExitFailure;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    ParseResult parsed = parse_args(args);
    if (!parsed.plan) {
        (parsed.exit_code == kExitOk ? out : err) << parsed.message;
        return parsed.exit_code;
    }
    try {
        return run(*parsed.plan, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace zsretinex::cli
