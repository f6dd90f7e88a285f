// qread: simulate, calibrate and evaluate photon-counting readout of an
// optical memory, with reproducible seeding and machine-readable output.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qread/calibrate.hpp"
#include "qread/discriminate.hpp"
#include "qread/montecarlo.hpp"
#include "qread/pipeline.hpp"
#include "qread/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Config {
    qread::ChannelPair pair{0.99, 1.0, 0.78, 0.77, 1.15e5, 0.0, 1e4};
    std::string transmitter = "tmsv";
    std::string sampling = "exact-pair";
    std::string decision_rule = "auto";
    std::int64_t frames_per_set = 10000;
    int subsets_for_errorbars = 10;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<double> tau0_grid;
    std::vector<double> n_list;
    std::int64_t read_cells = 0;
    std::string read_bits;

    json to_json() const {
        json j;
        j["channel"] = {{"tau0", pair.tau0},
                        {"tau1", pair.tau1},
                        {"eta_s", pair.eta_s},
                        {"eta_i", pair.eta_i},
                        {"mean_signal_photons", pair.mean_signal_photons},
                        {"straylight_mean", pair.straylight_mean},
                        {"electronic_variance", pair.electronic_variance}};
        j["transmitter"] = transmitter;
        j["sampling"] = sampling;
        j["decision_rule"] = decision_rule;
        j["frames_per_set"] = frames_per_set;
        j["subsets_for_errorbars"] = subsets_for_errorbars;
        j["seed"] = seed;
        j["threads"] = threads;
        if (!tau0_grid.empty()) j["sweep"]["tau0_grid"] = tau0_grid;
        if (!n_list.empty()) j["sweep"]["n_list"] = n_list;
        if (read_cells > 0) j["read"]["cells"] = read_cells;
        if (!read_bits.empty()) j["read"]["bits"] = read_bits;
        return j;
    }

    void merge_json(const json& j) {
        if (j.contains("channel")) {
            const auto& c = j.at("channel");
            if (c.contains("tau0")) pair.tau0 = c.at("tau0").get<double>();
            if (c.contains("tau1")) pair.tau1 = c.at("tau1").get<double>();
            if (c.contains("eta_s")) pair.eta_s = c.at("eta_s").get<double>();
            if (c.contains("eta_i")) pair.eta_i = c.at("eta_i").get<double>();
            if (c.contains("mean_signal_photons"))
                pair.mean_signal_photons = c.at("mean_signal_photons").get<double>();
            if (c.contains("straylight_mean"))
                pair.straylight_mean = c.at("straylight_mean").get<double>();
            if (c.contains("electronic_variance"))
                pair.electronic_variance = c.at("electronic_variance").get<double>();
        }
        if (j.contains("transmitter")) transmitter = j.at("transmitter").get<std::string>();
        if (j.contains("sampling")) sampling = j.at("sampling").get<std::string>();
        if (j.contains("decision_rule")) decision_rule = j.at("decision_rule").get<std::string>();
        if (j.contains("frames_per_set")) frames_per_set = j.at("frames_per_set").get<std::int64_t>();
        if (j.contains("subsets_for_errorbars"))
            subsets_for_errorbars = j.at("subsets_for_errorbars").get<int>();
        if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("threads")) threads = j.at("threads").get<int>();
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            if (s.contains("tau0_grid")) tau0_grid = s.at("tau0_grid").get<std::vector<double>>();
            if (s.contains("n_list")) n_list = s.at("n_list").get<std::vector<double>>();
        }
        if (j.contains("read")) {
            const auto& r = j.at("read");
            if (r.contains("cells")) read_cells = r.at("cells").get<std::int64_t>();
            if (r.contains("bits")) read_bits = r.at("bits").get<std::string>();
        }
    }

    qread::Transmitter transmitter_kind() const {
        if (transmitter == "tmsv") return qread::Transmitter::tmsv;
        if (transmitter == "coherent") return qread::Transmitter::coherent;
        throw qread::ValidationError("transmitter must be tmsv|coherent, got '" + transmitter + "'");
    }
    qread::Sampling sampling_kind() const {
        if (sampling == "exact-pair") return qread::Sampling::exact_pair;
        if (sampling == "gaussian") return qread::Sampling::gaussian;
        throw qread::ValidationError("sampling must be exact-pair|gaussian, got '" + sampling + "'");
    }
    std::optional<qread::RuleKind> rule_kind() const {
        if (decision_rule == "auto") return std::nullopt;
        if (decision_rule == "gaussian-likelihood") return qread::RuleKind::gaussian_likelihood;
        if (decision_rule == "likelihood-table") return qread::RuleKind::likelihood_table;
        if (decision_rule == "tmsv-threshold") return qread::RuleKind::tmsv_threshold;
        if (decision_rule == "coherent-threshold") return qread::RuleKind::coherent_threshold;
        throw qread::ValidationError("unknown decision_rule '" + decision_rule + "'");
    }

    qread::ExperimentConfig experiment_config() const {
        qread::ExperimentConfig cfg;
        cfg.pair = pair;
        cfg.transmitter = transmitter_kind();
        cfg.frames_per_set = frames_per_set;
        cfg.decision_rule = rule_kind();
        cfg.subsets_for_errorbars = subsets_for_errorbars;
        cfg.seed = seed;
        cfg.sampling = sampling_kind();
        cfg.threads = threads;
        return cfg;
    }
};

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw qread::ValidationError("cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << content;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Collects output files and emits the run manifest next to them. Re-running
// with the manifest as --config reproduces every listed file bit-exactly.
class RunWriter {
  public:
    RunWriter(std::string command, fs::path out_dir, const Config& cfg)
        : command_(std::move(command)), out_dir_(std::move(out_dir)), cfg_(cfg) {}

    fs::path emit(const std::string& name, const std::string& content) {
        const fs::path p = out_dir_ / name;
        write_file(p, content);
        char hex[32];
        std::snprintf(hex, sizeof hex, "%016llx", (unsigned long long)fnv1a64(content));
        outputs_.push_back({{"path", name}, {"fnv1a64", hex}});
        return p;
    }

    void finish() {
        json m;
        m["command"] = command_;
        m["tool"] = "qread";
        m["version"] = qread::kVersion;
        m["timestamp"] = iso_timestamp();
        m["seed"] = cfg_.seed;
        m["config"] = cfg_.to_json();
        m["outputs"] = outputs_;
        write_file(out_dir_ / "run_manifest.json", m.dump(2) + "\n");
    }

  private:
    std::string command_;
    fs::path out_dir_;
    const Config& cfg_;
    json outputs_ = json::array();
};

std::vector<double> parse_grid(const std::string& spec) {
    // "lo:hi[:step]" or comma-separated values
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double lo = 0, hi = 0, step = 1;
        const int k = std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step);
        if (k < 2 || step <= 0) throw qread::ValidationError("bad grid spec '" + spec + "'");
        for (double v = lo; v <= hi + 1e-12 * std::fabs(step); v += step) out.push_back(v);
        return out;
    }
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    if (out.empty()) throw qread::ValidationError("empty grid spec '" + spec + "'");
    return out;
}

std::string format_csv_row(std::initializer_list<double> vals) {
    std::string row;
    char buf[64];
    bool first = true;
    for (double v : vals) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        if (!first) row += ',';
        row += buf;
        first = false;
    }
    row += '\n';
    return row;
}

int cmd_bounds(const Config& cfg, const std::string& grid_spec, bool apply_eta,
               const fs::path& out_dir) {
    const std::vector<double> grid = parse_grid(grid_spec);
    double t0 = cfg.pair.tau0, t1 = cfg.pair.tau1;
    if (t0 > t1) throw qread::ValidationError("bounds: need tau0 <= tau1");
    if (apply_eta) {
        const auto [a, b] = qread::substitute_efficiency(cfg.pair);
        t0 = a;
        t1 = b;
    }
    std::string csv = "n,c_bound,p_err_cla_pc\n";
    for (double n : grid) {
        const double c = qread::classical_bound(n, t0, t1);
        // identical channels carry no information at any energy
        const double pc = t0 == t1 ? 0.5 : qread::coherent_error_probability(n, t0, t1);
        csv += format_csv_row({n, c, pc});
    }
    RunWriter w("bounds", out_dir, cfg);
    w.emit("bounds.csv", csv);
    w.finish();
    std::cout << "wrote " << (out_dir / "bounds.csv").string() << " (" << grid.size() << " rows)\n";
    return 0;
}

int cmd_simulate(const Config& cfg, const fs::path& out_dir, const std::string& format,
                 bool noise_sets) {
    qread::SimConfig sim;
    sim.transmitter = cfg.transmitter_kind();
    sim.pair = cfg.pair;
    sim.frames_per_set = cfg.frames_per_set;
    sim.rng_seed = cfg.seed;
    sim.sampling = cfg.sampling_kind();
    sim.threads = cfg.threads;
    sim.validate();
    RunWriter w("simulate", out_dir, cfg);
    const auto emit_set = [&](const qread::FrameSet& set, const std::string& stem) {
        std::ostringstream os;
        if (format == "json") {
            set.write_jsonl(os);
            w.emit(stem + ".jsonl", os.str());
        } else {
            set.write_csv(os);
            w.emit(stem + ".csv", os.str());
        }
    };
    for (int truth : {0, 1})
        emit_set(qread::simulate_set(sim, truth), "frames_tau" + std::to_string(truth));
    if (noise_sets) {
        emit_set(qread::simulate_dark_set(sim, cfg.frames_per_set), "frames_dark");
        emit_set(qread::simulate_shutter_set(sim, cfg.frames_per_set), "frames_shutter");
    }
    w.finish();
    std::cout << "wrote " << (noise_sets ? 4 : 2) << " frame sets of " << sim.frames_per_set
              << " frames to " << out_dir.string() << "\n";
    return 0;
}

qread::FrameSet load_frames(const fs::path& p) {
    const std::string body = read_file(p);
    std::istringstream is(body);
    if (p.extension() == ".jsonl") return qread::FrameSet::read_jsonl(is);
    return qread::FrameSet::read_csv(is);
}

int cmd_calibrate(const Config& cfg, const fs::path& frames_path, const fs::path& dark_path,
                  const fs::path& shutter_path, bool have_noise_files, const fs::path& out_dir) {
    const qread::FrameSet frames = load_frames(frames_path);
    double straylight = cfg.pair.straylight_mean;
    double elec = cfg.pair.electronic_variance;
    qread::Estimate straylight_est{straylight, 0.0}, elec_est{elec, 0.0};
    if (have_noise_files) {
        const auto [s, e] = qread::estimate_noise(load_frames(dark_path), load_frames(shutter_path),
                                                  cfg.subsets_for_errorbars);
        straylight_est = s;
        elec_est = e;
        straylight = s.value;
        elec = e.value;
    }
    qread::CalibrationResult r =
        qread::estimate_efficiencies(frames, straylight, elec, cfg.subsets_for_errorbars);
    r.straylight_mean = straylight_est;
    r.electronic_variance = elec_est;
    std::ostringstream os;
    r.write_json(os);
    RunWriter w("calibrate", out_dir, cfg);
    w.emit("calibration.json", os.str());
    w.finish();
    std::cout << "eta_s = " << r.eta_s.value << " +- " << r.eta_s.stddev
              << ", eta_i = " << r.eta_i.value << " +- " << r.eta_i.stddev
              << (r.out_of_range ? "  [OUT OF RANGE]" : "") << "\n";
    return 0;
}

int cmd_experiment(const Config& cfg, const fs::path& out_dir) {
    const qread::GainReport r = qread::run_experiment(cfg.experiment_config());
    qread::SweepRow row;
    row.tau0 = cfg.pair.tau0;
    row.n_photons = cfg.pair.mean_signal_photons;
    row.report = r;
    const qread::TheoryPrediction t = qread::predict_errors(cfg.pair);
    row.p_err_quantum_theory = t.p_err_quantum;
    row.p_err_classical_pc_theory = t.p_err_classical_pc;
    std::ostringstream csv, js;
    qread::write_gain_csv(csv, {row});
    qread::write_gain_json(js, {row});
    RunWriter w("experiment", out_dir, cfg);
    w.emit("gain_report.csv", csv.str());
    w.emit("gain_report.json", js.str());
    w.finish();
    std::cout << "P_err(pair) = " << r.p_err_quantum << ", P_err(single-beam) = "
              << r.p_err_classical_pc << ", C = " << r.c_bound << "\n"
              << "G_a = " << r.gain_a << " +- " << r.sigma_gain_a << " bits, G_emp = " << r.gain_emp
              << " +- " << r.sigma_gain_emp << " bits\n";
    return 0;
}

int cmd_sweep(const Config& cfg, const fs::path& out_dir) {
    if (cfg.tau0_grid.empty() || cfg.n_list.empty())
        throw qread::ValidationError("sweep: need --tau0-grid and --n-list (or sweep config keys)");
    const auto rows = qread::sweep(cfg.experiment_config(), cfg.tau0_grid, cfg.n_list);
    std::ostringstream csv, theory, js;
    qread::write_gain_csv(csv, rows);
    qread::write_theory_csv(theory, rows);
    qread::write_gain_json(js, rows);
    RunWriter w("sweep", out_dir, cfg);
    w.emit("sweep.csv", csv.str());
    w.emit("sweep_theory.csv", theory.str());
    w.emit("sweep.json", js.str());
    w.finish();
    double max_ga = -1.0, max_ge = -1.0;
    for (const auto& r : rows) {
        max_ga = std::max(max_ga, r.report.gain_a);
        max_ge = std::max(max_ge, r.report.gain_emp);
    }
    std::cout << rows.size() << " cells; max G_a = " << max_ga << " bits, max G_emp = " << max_ge
              << " bits\n";
    return 0;
}

int cmd_read(const Config& cfg, const fs::path& out_dir) {
    qread::MemoryImage image;
    if (!cfg.read_bits.empty()) {
        for (char c : cfg.read_bits) {
            if (c != '0' && c != '1')
                throw qread::ValidationError("read: bits string must be 0/1 characters");
            image.bits.push_back(c - '0');
        }
    } else if (cfg.read_cells > 0) {
        qread::CounterRng rng(cfg.seed, 0xB175u);
        for (std::int64_t i = 0; i < cfg.read_cells; ++i)
            image.bits.push_back(int(rng() & 1u));
    } else {
        throw qread::ValidationError("read: need --cells or --bits (or read config keys)");
    }
    const qread::ReadResult r = qread::read_memory(image, cfg.experiment_config());
    json j;
    j["cells"] = image.bits.size();
    j["ber"] = r.ber;
    j["ber_ci95_low"] = r.ber_ci_low;
    j["ber_ci95_high"] = r.ber_ci_high;
    j["info_per_cell_bits"] = r.info_per_cell;
    std::string decoded;
    decoded.reserve(r.decoded.size());
    for (int b : r.decoded) decoded += char('0' + b);
    j["decoded"] = decoded;
    RunWriter w("read", out_dir, cfg);
    w.emit("read_result.json", j.dump(2) + "\n");
    w.finish();
    std::cout << "BER = " << r.ber << " [" << r.ber_ci_low << ", " << r.ber_ci_high
              << "] over " << image.bits.size() << " cells; " << r.info_per_cell
              << " bits/cell\n";
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"photon-counting readout of a lossy optical memory: bounds, simulation, "
                 "calibration and gain evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", qread::kVersion);

    std::string config_path, out_dir = ".", format = "csv";
    Config cfg;

    // pre-scan for --config so file values become defaults the flags override
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    }
    if (!config_path.empty()) {
        json j = json::parse(read_file(config_path));
        if (j.contains("config") && j.contains("command")) j = j.at("config");  // a manifest
        cfg.merge_json(j);
    }

    const auto add_common = [&](CLI::App* c) -> CLI::Option* {
        c->add_option("--config", config_path, "JSON config file (or a previous run manifest)");
        c->add_option("--seed", cfg.seed, "RNG seed");
        c->add_option("--out", out_dir, "output directory");
        c->add_option("--format", format, "frame file format: csv|json")
            ->check(CLI::IsMember({"csv", "json"}));
        c->add_option("--threads", cfg.threads, "worker threads for frame generation");
        c->add_option("--tau0", cfg.pair.tau0, "cell transmittance for bit 0");
        c->add_option("--tau1", cfg.pair.tau1, "cell transmittance for bit 1");
        CLI::Option* eta_opt =
            c->add_option("--eta-s", cfg.pair.eta_s, "signal-arm detection efficiency");
        c->add_option("--eta-i", cfg.pair.eta_i, "idler-arm detection efficiency");
        c->add_option("--n-photons", cfg.pair.mean_signal_photons, "mean photons at the cell");
        c->add_option("--straylight", cfg.pair.straylight_mean, "straylight mean per region");
        c->add_option("--electronic-variance", cfg.pair.electronic_variance,
                      "electronic noise variance per region");
        c->add_option("--frames", cfg.frames_per_set, "frames per set");
        c->add_option("--subsets", cfg.subsets_for_errorbars, "subsets for error bars");
        c->add_option("--transmitter", cfg.transmitter, "tmsv|coherent")
            ->check(CLI::IsMember({"tmsv", "coherent"}));
        c->add_option("--sampling", cfg.sampling, "exact-pair|gaussian")
            ->check(CLI::IsMember({"exact-pair", "gaussian"}));
        c->add_option("--rule", cfg.decision_rule,
                      "auto|gaussian-likelihood|likelihood-table|tmsv-threshold|coherent-threshold");
        return eta_opt;
    };

    auto* bounds = app.add_subcommand("bounds", "classical bound vs photon-counting limit over N");
    std::string n_grid = "1:1000";
    CLI::Option* bounds_eta = add_common(bounds);
    bounds->add_option("--n-grid", n_grid, "N grid: lo:hi[:step] or comma list");

    auto* simulate = app.add_subcommand("simulate", "generate labeled frame sets for both bits");
    bool noise_sets = false;
    add_common(simulate);
    simulate->add_flag("--noise-sets", noise_sets,
                       "also write dark-region and shutter-closed calibration sets");

    auto* calibrate = app.add_subcommand("calibrate", "efficiency estimation from frame data");
    std::string frames_path, dark_path, shutter_path;
    add_common(calibrate);
    calibrate->add_option("--input", frames_path, "frame set to calibrate on (CSV or JSONL)")
        ->required();
    calibrate->add_option("--dark", dark_path, "dark-region frame set for straylight");
    calibrate->add_option("--shutter", shutter_path, "shutter-closed frame set for electronic noise");

    auto* experiment = app.add_subcommand("experiment", "simulate both bits, decide, report gains");
    add_common(experiment);

    auto* sweep = app.add_subcommand("sweep", "gain table over a (tau0, N) grid");
    std::string tau0_grid_spec, n_list_spec;
    add_common(sweep);
    sweep->add_option("--tau0-grid", tau0_grid_spec, "tau0 grid: lo:hi:step or comma list");
    sweep->add_option("--n-list", n_list_spec, "comma list of mean photon numbers");

    auto* read = app.add_subcommand("read", "write a bit image, read it back, report BER");
    std::string bits;
    std::int64_t cells = 0;
    add_common(read);
    read->add_option("--cells", cells, "number of random cells");
    read->add_option("--bits", bits, "explicit bit string, e.g. 0110");

    app.parse(argc, argv);

    const fs::path out(out_dir);
    if (sweep->parsed()) {
        if (!tau0_grid_spec.empty()) cfg.tau0_grid = parse_grid(tau0_grid_spec);
        if (!n_list_spec.empty()) cfg.n_list = parse_grid(n_list_spec);
    }
    if (read->parsed()) {
        if (cells > 0) cfg.read_cells = cells;
        if (!bits.empty()) cfg.read_bits = bits;
    }

    // passing --eta-s to bounds folds the signal efficiency into the
    // effective transmittances; otherwise the raw taus are evaluated
    if (bounds->parsed()) return cmd_bounds(cfg, n_grid, bounds_eta->count() > 0, out);
    if (simulate->parsed()) return cmd_simulate(cfg, out, format, noise_sets);
    if (calibrate->parsed())
        return cmd_calibrate(cfg, frames_path, dark_path, shutter_path,
                             !dark_path.empty() && !shutter_path.empty(), out);
    if (experiment->parsed()) return cmd_experiment(cfg, out);
    if (sweep->parsed()) return cmd_sweep(cfg, out);
    if (read->parsed()) return cmd_read(cfg, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help / --version
        std::cerr << "ERROR:validation:" << e.what() << "\n";
        return 2;
    } catch (const qread::ValidationError& e) {
        std::cerr << "ERROR:validation:" << e.what() << "\n";
        return 2;
    } catch (const qread::DegenerateChannels& e) {
        std::cerr << "ERROR:degenerate-channels:" << e.what() << "\n";
        return 2;
    } catch (const qread::InvalidRegime& e) {
        std::cerr << "ERROR:invalid-regime:" << e.what() << "\n";
        return 2;
    } catch (const qread::UnlabeledData& e) {
        std::cerr << "ERROR:unlabeled-data:" << e.what() << "\n";
        return 2;
    } catch (const qread::RuntimeGuard& e) {
        std::cerr << "ERROR:runtime-guard:" << e.what() << "\n";
        return 1;
    } catch (const qread::EmptyIdler& e) {
        std::cerr << "ERROR:empty-idler:" << e.what() << "\n";
        return 1;
    } catch (const qread::DivisionDomain& e) {
        std::cerr << "ERROR:division-domain:" << e.what() << "\n";
        return 1;
    } catch (const qread::ModelEvaluationError& e) {
        std::cerr << "ERROR:model-evaluation:" << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "ERROR:validation:bad config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ERROR:runtime:" << e.what() << "\n";
        return 1;
    }
}
