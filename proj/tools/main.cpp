#include <cstdint>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "yolocs/config.hpp"
#include "yolocs/graph.hpp"
#include "yolocs/parallel.hpp"
#include "yolocs/profile.hpp"
#include "yolocs/train/toy.hpp"
#include "yolocs/verify/suites.hpp"

namespace {

using namespace yolocs;

ModelConfig load_named_config(const std::string& name, const std::string& config_dir, int nc) {
    ModelConfig cfg = load_config_file(resolve_config_path(name, config_dir));
    if (nc >= 0) cfg.nc = nc;
    return cfg;
}

// FNV-1a over the exact float bit patterns; any single-bit output change
// flips the digest, which is what the determinism checks rely on.
std::string checksum_hex(const Tensor4f& t) {
    std::uint64_t h = 1469598103934665603ull;
    for (float v : t.data) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        for (int b = 0; b < 4; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

int run_summary(const std::string& name, const std::string& config_dir, int nc, i64 img,
                const std::string& format) {
    Graph<float> g(load_named_config(name, config_dir, nc));
    ProfileReport rep = g.profile(img);
    std::cout << (format == "kv" ? render_kv(rep) : render_text(rep));
    return 0;
}

int run_compare(const std::vector<std::string>& names, const std::string& config_dir, int nc,
                i64 img, const std::string& format) {
    std::vector<ProfileReport> reps;
    for (const std::string& n : names) {
        Graph<float> g(load_named_config(n, config_dir, nc));
        reps.push_back(g.profile(img));
    }
    std::cout << (format == "kv" ? render_compare_kv(reps) : render_compare_text(reps));
    return 0;
}

int run_verify(const std::string& suite, const std::string& format) {
    std::vector<std::pair<std::string, std::vector<verify::SuiteCheck>>> groups;
    if (suite == "kernels" || suite == "all")
        groups.emplace_back("kernels", verify::kernel_suite());
    if (suite == "gradients" || suite == "all")
        groups.emplace_back("gradients", verify::gradient_suite());
    if (suite == "receptive-field" || suite == "all")
        groups.emplace_back("receptive-field", verify::receptive_field_suite());

    int total = 0, passed = 0, idx = 0;
    for (const auto& [gname, checks] : groups) {
        for (const verify::SuiteCheck& c : checks) {
            ++total;
            if (c.ok) ++passed;
            if (format == "kv") {
                std::cout << "check." << idx << ".suite=" << gname << "\n"
                          << "check." << idx << ".name=" << c.name << "\n"
                          << "check." << idx << ".ok=" << (c.ok ? 1 : 0) << "\n"
                          << "check." << idx << ".detail=" << c.detail << "\n";
            } else {
                std::cout << (c.ok ? "[PASS] " : "[FAIL] ") << gname << ": " << c.name;
                if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
                std::cout << "\n";
            }
            ++idx;
        }
    }
    if (format == "kv")
        std::cout << "checks.total=" << total << "\nchecks.passed=" << passed << "\n";
    else
        std::cout << "passed " << passed << "/" << total << " checks\n";
    return passed == total ? 0 : 1;
}

int run_forward(const std::string& name, const std::string& config_dir, i64 img, unsigned seed,
                const std::string& format) {
    Graph<float> g(load_named_config(name, config_dir, -1));
    g.init_params(seed);
    Tensor4f input({1, 3, img, img});
    std::mt19937 rng(seed + 1);  // input stream independent of the weight streams
    input.fill_uniform(rng, 0.0f, 1.0f);
    std::vector<Tensor4f> outs = g.forward(input, false, false);
    if (format == "kv") {
        std::cout << "config=" << name << "\nimg_size=" << img << "\nseed=" << seed << "\n";
        for (size_t i = 0; i < outs.size(); ++i) {
            std::cout << "level." << i << ".shape=" << outs[i].shape.str() << "\n"
                      << "level." << i << ".checksum=" << checksum_hex(outs[i]) << "\n";
        }
    } else {
        std::cout << "config: " << name << "  img: " << img << "  seed: " << seed << "\n";
        for (size_t i = 0; i < outs.size(); ++i)
            std::cout << "level " << i << ": shape " << outs[i].shape.str() << "  checksum "
                      << checksum_hex(outs[i]) << "\n";
    }
    return 0;
}

int run_toy_train(const std::string& name, const std::string& config_dir, int steps, double lr,
                  unsigned seed, i64 img, const std::string& format) {
    ModelConfig cfg = load_named_config(name, config_dir, -1);
    train::ToyTrainResult res = train::toy_train(cfg, steps, lr, seed, img);
    std::ostringstream loss_fmt;
    loss_fmt << std::setprecision(17);
    if (format == "kv") {
        std::cout << "config=" << name << "\nsteps=" << steps << "\nlr=" << lr
                  << "\nseed=" << seed << "\npositives=" << res.positives << "\n";
        for (size_t i = 0; i < res.losses.size(); ++i) {
            loss_fmt.str("");
            loss_fmt << res.losses[i];
            std::cout << "loss." << i << "=" << loss_fmt.str() << "\n";
        }
        std::cout << "initial=" << res.initial() << "\nfinal=" << res.final()
                  << "\nconverged=" << (res.converged ? 1 : 0) << "\n";
        if (res.diverged_at >= 0) std::cout << "diverged_at=" << res.diverged_at << "\n";
    } else {
        std::cout << "config: " << name << "  steps: " << steps << "  lr: " << lr
                  << "  seed: " << seed << "  positives: " << res.positives << "\n";
        for (size_t i = 0; i < res.losses.size(); ++i)
            std::cout << "step " << std::setw(4) << i << "  loss " << std::setprecision(8)
                      << res.losses[i] << "\n";
        std::cout << "initial " << res.initial() << "  final " << res.final() << "  ratio "
                  << (res.initial() > 0 ? res.final() / res.initial() : 0.0) << "  converged "
                  << (res.converged ? "yes" : "no") << "\n";
        if (res.diverged_at >= 0)
            std::cout << "loss became non-finite at step " << res.diverged_at << "\n";
    }
    return res.diverged_at >= 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cost analysis, verification, and toy training for the yolocs model family"};
    app.require_subcommand(1);

    std::string config_dir = "./configs";
    std::string format = "text";
    int threads = 0;
    app.add_option("--config-dir", config_dir, "directory searched when a config is given by name")
        ->capture_default_str();
    app.add_option("--format", format, "output format")
        ->check(CLI::IsMember({"text", "kv"}))
        ->capture_default_str();
    app.add_option("--threads", threads, "kernel worker threads, 0 = hardware count")
        ->capture_default_str();

    auto* sum = app.add_subcommand("summary", "per-layer parameter and flop table for one config");
    std::string sum_config;
    i64 sum_img = 640;
    int sum_nc = -1;
    sum->add_option("config", sum_config, "config name or path")->required();
    sum->add_option("--img-size", sum_img, "input resolution")->capture_default_str();
    sum->add_option("--nc", sum_nc, "class count override, -1 keeps the config value")
        ->capture_default_str();

    auto* cmp = app.add_subcommand("compare", "total cost deltas of later configs vs the first");
    std::vector<std::string> cmp_configs;
    i64 cmp_img = 640;
    int cmp_nc = -1;
    cmp->add_option("configs", cmp_configs, "two or more config names or paths")
        ->required()
        ->expected(2, -1);
    cmp->add_option("--img-size", cmp_img, "input resolution")->capture_default_str();
    cmp->add_option("--nc", cmp_nc, "class count override, -1 keeps the config values")
        ->capture_default_str();

    auto* ver = app.add_subcommand("verify", "run the self-check suites, nonzero exit on failure");
    std::string ver_suite = "all";
    ver->add_option("--suite", ver_suite, "which suite to run")
        ->check(CLI::IsMember({"kernels", "gradients", "receptive-field", "all"}))
        ->capture_default_str();

    auto* fwd = app.add_subcommand("forward", "run one seeded forward pass, print shapes and checksums");
    std::string fwd_config;
    i64 fwd_img = 640;
    unsigned fwd_seed = 0;
    fwd->add_option("config", fwd_config, "config name or path")->required();
    fwd->add_option("--img-size", fwd_img, "input resolution, multiple of 32")
        ->capture_default_str();
    fwd->add_option("--seed", fwd_seed, "seed for weights and input")->capture_default_str();

    auto* toy = app.add_subcommand("toy-train", "overfit a synthetic dataset, print the loss path");
    std::string toy_config = "micro";
    int toy_steps = 200;
    double toy_lr = 1e-2;
    unsigned toy_seed = 7;
    i64 toy_img = 96;
    toy->add_option("config", toy_config, "config name or path")->capture_default_str();
    toy->add_option("--steps", toy_steps, "gradient descent steps")->capture_default_str();
    toy->add_option("--lr", toy_lr, "learning rate")->capture_default_str();
    toy->add_option("--seed", toy_seed, "dataset and init seed")->capture_default_str();
    toy->add_option("--img-size", toy_img, "image resolution, multiple of 32")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);  // prints help or the parse error itself
        return code == 0 ? 0 : 2;
    }

    int hw = static_cast<int>(std::thread::hardware_concurrency());
    yolocs::set_num_threads(threads > 0 ? threads : (hw > 0 ? hw : 1));

    try {
        if (sum->parsed()) return run_summary(sum_config, config_dir, sum_nc, sum_img, format);
        if (cmp->parsed()) return run_compare(cmp_configs, config_dir, cmp_nc, cmp_img, format);
        if (ver->parsed()) return run_verify(ver_suite, format);
        if (fwd->parsed()) return run_forward(fwd_config, config_dir, fwd_img, fwd_seed, format);
        if (toy->parsed())
            return run_toy_train(toy_config, config_dir, toy_steps, toy_lr, toy_seed, toy_img,
                                 format);
    } catch (const std::exception& e) {
        std::cerr << "yolocs: error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
