// Batch driver for the CV-QKD synchronization simulator.
//
// Subcommands: calibrate, run, sweep-delay, sweep-skew, report.
// Exit codes: 0 ok, 1 config error, 2 I/O error, 3 every frame failed.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "cvqkd/harness.hpp"

namespace {

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    long long frames = -1;
    std::string mode;
    int threads = -1;
};

cvqkd::ExperimentConfig load_config(const CommonArgs& a) {
    cvqkd::ExperimentConfig cfg;
    if (!a.config_path.empty()) cfg = cvqkd::parse_config_file(a.config_path);
    if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
    if (a.frames > 0) cfg.n_frames = static_cast<std::size_t>(a.frames);
    if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
    if (a.threads >= 0) cfg.threads = a.threads;
    if (!a.mode.empty()) {
        if (a.mode == "shared") cfg.mode = cvqkd::ClockMode::SharedClock;
        else if (a.mode == "free") cfg.mode = cvqkd::ClockMode::FreeRunning;
        else throw cvqkd::invalid_config("--mode must be shared or free");
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "configuration file (key = value lines)");
    cmd->add_option("--seed", a.seed, "master seed");
    cmd->add_option("--frames", a.frames, "number of frames");
    cmd->add_option("--mode", a.mode, "clock mode: shared | free");
    cmd->add_option("--out", a.out_dir, "output directory");
    cmd->add_option("--threads", a.threads, "worker threads (0 = auto)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"local-LO CV-QKD digital synchronization simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string offsets_csv = "0,1,2,5,10,25";
    std::string skews_csv = "1.0,1.00002";

    CLI::App* cmd_cal = app.add_subcommand("calibrate", "measure receiver noise calibration");
    add_common(cmd_cal, args);
    CLI::App* cmd_run = app.add_subcommand("run", "end-to-end batch run");
    add_common(cmd_run, args);
    bool with_plots = false;
    cmd_run->add_flag("--plots", with_plots, "also write plot data files");
    CLI::App* cmd_sd = app.add_subcommand("sweep-delay", "forced timing error sweep");
    add_common(cmd_sd, args);
    cmd_sd->add_option("--offsets", offsets_csv, "comma list of sample offsets (must include 0)");
    CLI::App* cmd_sk = app.add_subcommand("sweep-skew", "clock skew sweep, compensation on/off");
    add_common(cmd_sk, args);
    cmd_sk->add_option("--skews", skews_csv, "comma list of clock ratios");
    CLI::App* cmd_rep = app.add_subcommand("report", "recompute aggregates from frames.csv");
    add_common(cmd_rep, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_cal->parsed()) {
            cvqkd::ExperimentConfig cfg = load_config(args);
            cfg.validate();
            auto cal = cvqkd::run_calibration(cfg.channel, cfg.layout, cfg.mean_photon_number,
                                              cfg.seed, cfg.calibration_frames);
            std::printf("electronic_variance = %.6g\n", cal.electronic_variance);
            std::printf("shot_plus_electronic_variance = %.6g\n",
                        cal.shot_plus_electronic_variance);
            std::printf("shot_noise_unit = %.6g\n", cal.snu());
            std::printf("electronic_noise_snu = %.6g\n", cal.v_el_snu());
            std::printf("modulation_variance_snu = %.6g\n", cal.modulation_variance);
            return 0;
        }
        if (cmd_run->parsed()) {
            cvqkd::ExperimentConfig cfg = load_config(args);
            cvqkd::RunReport rep = cvqkd::run(cfg);
            std::printf("frames:            %zu (%zu sync failures)\n", rep.frames.size(),
                        rep.sync_failures);
            std::printf("accepted fraction: %.4f\n", rep.fraction_accepted);
            std::printf("mean excess noise: %.3f mPNU (std %.3f)\n", rep.mean_excess_mpnu,
                        rep.std_excess_mpnu);
            std::printf("mean key fraction: %.5f bits/symbol\n", rep.mean_skf);
            std::printf("wall time:         %.2f s\n", rep.wall_seconds);
            if (with_plots && !cfg.output_dir.empty()) cvqkd::emit_plots(rep, cfg.output_dir);
            if (rep.fraction_accepted == 0.0) return 3;
            return 0;
        }
        if (cmd_sd->parsed()) {
            cvqkd::ExperimentConfig cfg = load_config(args);
            auto rows = cvqkd::sweep_delay_error(cfg, parse_list(offsets_csv));
            std::string dir = cfg.output_dir.empty() ? "." : cfg.output_dir;
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            std::ofstream f(dir + "/delay_sweep.dat");
            if (!f) throw cvqkd::io_error("cannot write delay_sweep.dat");
            f << "# offset_samples mean_excess_mpnu skf accepted\n";
            std::printf("# offset_samples mean_excess_mpnu skf accepted\n");
            for (const auto& r : rows) {
                f << r.offset_samples << ' ' << r.mean_excess_mpnu << ' ' << r.skf << ' '
                  << r.fraction_accepted << '\n';
                std::printf("%8.1f %12.3f %8.5f %6.3f\n", r.offset_samples, r.mean_excess_mpnu,
                            r.skf, r.fraction_accepted);
            }
            return 0;
        }
        if (cmd_sk->parsed()) {
            cvqkd::ExperimentConfig cfg = load_config(args);
            auto rows = cvqkd::sweep_skew(cfg, parse_list(skews_csv));
            std::string dir = cfg.output_dir.empty() ? "." : cfg.output_dir;
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            std::ofstream f(dir + "/skew_sweep.dat");
            if (!f) throw cvqkd::io_error("cannot write skew_sweep.dat");
            f << "# skew ber_compensated ber_uncompensated\n";
            std::printf("# skew ber_compensated ber_uncompensated\n");
            for (const auto& r : rows) {
                f << r.skew << ' ' << r.ber_compensated << ' ' << r.ber_uncompensated << '\n';
                std::printf("%.8f %10.5f %10.5f\n", r.skew, r.ber_compensated,
                            r.ber_uncompensated);
            }
            return 0;
        }
        if (cmd_rep->parsed()) {
            std::string dir = args.out_dir.empty() ? "out" : args.out_dir;
            std::string msg;
            const bool ok = cvqkd::verify_report_dir(dir, &msg);
            std::printf("%s\n", msg.c_str());
            return ok ? 0 : 2;
        }
    } catch (const cvqkd::invalid_config& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const cvqkd::invalid_parameter& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const cvqkd::io_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
