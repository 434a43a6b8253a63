#include "tmadfrc/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <locale>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "tmadfrc/coarse.hpp"
#include "tmadfrc/comms.hpp"
#include "tmadfrc/refine.hpp"
#include "tmadfrc/rng.hpp"
#include "tmadfrc/scene.hpp"
#include "tmadfrc/tma.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tmadfrc {

namespace {

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config_path;
    std::string scene_path;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool with_scene)
{
    cmd->add_option("--config", c.config_path, "System config JSON (default: built-in)");
    if (with_scene) cmd->add_option("--scene", c.scene_path, "Scene JSON (default: built-in three-target scene)");
    cmd->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", c.seed, "Master seed for all randomness")->capture_default_str();
    cmd->add_option("--set", c.overrides, "Config override key=value (repeatable)");
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json_file(const std::string& path)
{
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
}

SystemConfig load_config(const Common& c, const SystemConfig& fallback)
{
    SystemConfig cfg = fallback;
    if (!c.config_path.empty()) {
        try {
            cfg = config_from_json_text(read_file(c.config_path));
        } catch (const ConfigError& e) {
            throw ConfigError(c.config_path + ": " + e.what());
        }
    }
    cfg = apply_overrides(cfg, c.overrides);
    validate_config(cfg);
    return cfg;
}

Scene load_scene(const Common& c)
{
    Scene scene = table2_scene(c.seed);
    if (!c.scene_path.empty()) {
        try {
            scene = read_json_file(c.scene_path).get<Scene>();
        } catch (const ConfigError& e) {
            throw ConfigError(c.scene_path + ": " + e.what());
        }
    }
    scene.seed = c.seed;
    return scene;
}

fs::path prepare_out(const Common& c)
{
    const fs::path out(c.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory '" + c.out_dir + "'");
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

json provenance(const SystemConfig& cfg, std::uint64_t seed)
{
    return json{{"config_hash", config_hash(cfg)}, {"seed", seed}, {"tool_version", kToolVersion}};
}

void write_json(const fs::path& path, json body, const SystemConfig& cfg, std::uint64_t seed)
{
    body["provenance"] = provenance(cfg, seed);
    write_text(path, body.dump(2) + "\n");
}

std::string csv_preamble(const SystemConfig& cfg, std::uint64_t seed)
{
    return "# config_hash=" + config_hash(cfg) + "\n# seed=" + std::to_string(seed) + "\n# tool_version=" +
           kToolVersion + "\n";
}

void write_run_meta(const fs::path& out, const std::string& command, const std::vector<std::string>& args)
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ts;
    ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    json meta{{"command", command}, {"arguments", args}, {"timestamp_utc", ts.str()}, {"tool_version", kToolVersion}};
    write_text(out / "run_meta.json", meta.dump(2) + "\n");
}

// ---------------------------------------------------------------- dm-check

struct DmArgs {
    std::size_t probes = 50;
    std::optional<double> duty;
};

int cmd_dm_check(const Common& c, const DmArgs& a)
{
    const SystemConfig cfg = load_config(c, table1_config());
    const fs::path out = prepare_out(c);
    SwitchingPattern pattern = design_pattern(cfg, cfg.cu_angle_deg);
    if (a.duty) {
        for (auto& d : pattern.duty) d = *a.duty;
        validate_pattern(pattern, cfg);
    }

    const double sine0 = std::sin(deg_to_rad(cfg.cu_angle_deg));
    Rng rng(derive_seed(c.seed, "dm-probes"));
    std::vector<double> probes;
    while (probes.size() < a.probes) {
        const double theta = -90.0 + 180.0 * rng.uniform();
        if (std::abs(std::sin(deg_to_rad(theta)) - sine0) > 1e-6) probes.push_back(theta);
    }
    const DmReport r = check_dm_condition(pattern, cfg, cfg.cu_angle_deg, probes);

    json body{{"config", cfg},
              {"pattern", pattern},
              {"steer_angle_deg", r.steer_angle_deg},
              {"fundamental_at_steer", r.fundamental_at_steer},
              {"max_harmonic_at_steer", r.max_harmonic_at_steer},
              {"min_probe_harmonic", r.min_probe_harmonic},
              {"weakest_probe_deg", r.weakest_probe_deg},
              {"harmonic_tolerance", r.harmonic_tolerance},
              {"scrambling_threshold", r.scrambling_threshold},
              {"fundamental_ok", r.fundamental_ok},
              {"harmonics_cancel_ok", r.harmonics_cancel_ok},
              {"scrambling_ok", r.scrambling_ok},
              {"passed", r.passed()},
              {"probes_deg", probes}};
    write_json(out / "dm_report.json", body, cfg, c.seed);
    if (r.passed()) {
        std::cout << "dm-check: pass (max |V(m!=0, theta0)| / |V(0, theta0)| = "
                  << r.max_harmonic_at_steer / r.fundamental_at_steer << ")\n";
        return 0;
    }
    std::cout << "dm-check: FAIL: " << r.failure_summary() << "\n";
    return 1;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Common& c)
{
    const SystemConfig cfg = load_config(c, table1_config());
    const Scene scene = load_scene(c);
    validate_scene(scene, cfg);
    const fs::path out = prepare_out(c);

    const SwitchingPattern pattern = design_pattern(cfg, cfg.cu_angle_deg);
    const SymbolGrid data = random_frame(cfg, c.seed);
    const AntennaGrid returns = radar_returns(data, pattern, cfg, scene);

    write_grid(out / "returns.grid", returns);
    write_grid(out / "data.grid", data);
    write_json(out / "pattern.json", json{{"pattern", pattern}}, cfg, c.seed);
    write_json(out / "simulate.json", json{{"config", cfg}, {"scene", scene}}, cfg, c.seed);
    std::cout << "simulate: " << scene.targets.size() << " targets -> " << (out / "returns.grid").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    std::string grid_path;
    std::string data_path;
    std::string pattern_path;
    bool full_frame = false;
};

void write_estimate_outputs(const fs::path& out, const Algorithm1Result& r, const SystemConfig& cfg,
                            std::uint64_t seed, const std::string& stem)
{
    json est = r.estimates;
    write_json(out / (stem + ".json"), json{{"estimates", est}}, cfg, seed);
    if (r.coarse) write_text(out / "angle_spectrum.csv", csv_preamble(cfg, seed) + spectrum_csv(r.coarse->angles.spectrum));
    for (const auto& b : r.bins) {
        if (b.music.grid_deg.empty()) continue;
        write_text(out / ("pseudospectrum_bin" + std::to_string(b.angle_bin) + ".csv"),
                   csv_preamble(cfg, seed) + pseudospectrum_csv(b.music));
    }
}

int cmd_estimate(const Common& c, const EstimateArgs& a)
{
    const SystemConfig cfg = load_config(c, table1_config());
    const AntennaGrid returns = read_antenna_grid(a.grid_path);
    const SymbolGrid data = read_symbol_grid(a.data_path);
    SwitchingPattern pattern = design_pattern(cfg, cfg.cu_angle_deg);
    if (!a.pattern_path.empty()) {
        json j = read_json_file(a.pattern_path);
        pattern = (j.contains("pattern") ? j.at("pattern") : j).get<SwitchingPattern>();
        validate_pattern(pattern, cfg);
    }
    if (returns.num_antennas() != cfg.num_rx_antennas || returns.num_subcarriers() != cfg.num_subcarriers ||
        returns.num_symbols() != cfg.num_ofdm_symbols)
        throw IoError(a.grid_path + ": grid dimensions do not match the config");
    if (data.num_subcarriers() != cfg.num_subcarriers || data.num_symbols() != cfg.num_ofdm_symbols)
        throw IoError(a.data_path + ": grid dimensions do not match the config");
    const fs::path out = prepare_out(c);

    Algorithm1Options opts;
    opts.music.full_frame = a.full_frame;
    const Algorithm1Result r = algorithm1(returns, data, pattern, cfg, opts);
    write_estimate_outputs(out, r, cfg, c.seed, "estimates");

    std::cout << "estimate: " << r.estimates.coarse.size() << " coarse, " << r.estimates.refined.size()
              << " refined, " << r.estimates.failures.size() << " failed bins\n";
    return r.estimates.refined.empty() ? 1 : 0;
}

// ---------------------------------------------------------------- ber-sweep

struct BerArgs {
    std::optional<double> snr_db;
    std::size_t frames = 200;
    double angle_min = -90.0;
    double angle_max = 90.0;
    double angle_step = 1.0;
    std::size_t order = 4;
    std::size_t threads = 0;
};

int cmd_ber_sweep(const Common& c, const BerArgs& a)
{
    const SystemConfig cfg = load_config(c, table1_config());
    if (!(a.angle_step > 0.0) || a.angle_min > a.angle_max || a.angle_min < -90.0 || a.angle_max > 90.0)
        throw ConfigError("angle sweep must satisfy -90 <= min <= max <= 90 with step > 0");
    const fs::path out = prepare_out(c);

    std::vector<double> angles;
    const auto n = static_cast<long>(std::floor((a.angle_max - a.angle_min) / a.angle_step + 1e-9));
    for (long i = 0; i <= n; ++i) angles.push_back(a.angle_min + static_cast<double>(i) * a.angle_step);

    const SwitchingPattern pattern = design_pattern(cfg, cfg.cu_angle_deg);
    const auto curve = ber_vs_angle(pattern, cfg, angles, a.snr_db.value_or(cfg.snr_db), a.frames, c.seed,
                                    BerSweepOptions{a.order, a.threads});
    write_text(out / "ber_curve.csv", csv_preamble(cfg, c.seed) + ber_csv(curve));
    std::cout << "ber-sweep: " << curve.size() << " angles -> " << (out / "ber_curve.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- reproduce-table2

struct Table2Args {
    bool full_frame = false;
};

struct Expected {
    double angle, range, velocity;
};

int cmd_reproduce_table2(const Common& c, const Table2Args& a)
{
    const SystemConfig cfg = load_config(c, table2_config());
    const Scene scene = load_scene(c);
    validate_scene(scene, cfg);
    const fs::path out = prepare_out(c);

    const SwitchingPattern pattern = design_pattern(cfg, cfg.cu_angle_deg);
    const SymbolGrid data = random_frame(cfg, c.seed);
    const AntennaGrid returns = radar_returns(data, pattern, cfg, scene);
    Algorithm1Options opts;
    opts.music.full_frame = a.full_frame;
    const Algorithm1Result r = algorithm1(returns, data, pattern, cfg, opts);

    std::ostringstream csv;
    csv.imbue(std::locale::classic());
    csv.precision(17);
    csv << csv_preamble(cfg, c.seed) << "stage,angle_deg,range_m,velocity_mps\n";
    for (const auto& e : r.estimates.coarse) csv << "coarse," << e.angle_deg << ',' << e.range_m << ',' << e.velocity_mps << '\n';
    for (const auto& e : r.estimates.refined) csv << "refined," << e.angle_deg << ',' << e.range_m << ',' << e.velocity_mps << '\n';
    write_text(out / "table2.csv", csv.str());

    const auto res = derived_resolutions(cfg);
    const double vel_step = res.velocity_res_mps / static_cast<double>(opts.velocity_ls.grid_points - 1);
    const std::vector<Expected> coarse_expected{{19.47, 58.59, -9.38}, {19.47, 58.59, 9.38}, {-30.0, 117.19, 21.09}};
    const std::vector<Expected> refined_expected{{20.0, 50.00, -10.08}, {22.0, 60.16, 10.08}, {-30.0, 120.12, 19.92}};

    json checks = json::array();
    bool all_ok = true;
    for (const auto& x : coarse_expected) {
        bool ok = false;
        for (const auto& e : r.estimates.coarse)
            ok |= std::abs(e.angle_deg - x.angle) < 0.01 && std::abs(e.range_m - x.range) < 0.01 &&
                  std::abs(e.velocity_mps - x.velocity) < 0.01;
        checks.push_back({{"stage", "coarse"}, {"angle_deg", x.angle}, {"range_m", x.range}, {"velocity_mps", x.velocity}, {"ok", ok}});
        all_ok &= ok;
    }
    for (const auto& x : refined_expected) {
        bool ok = false;
        for (const auto& e : r.estimates.refined)
            ok |= std::abs(e.angle_deg - x.angle) <= 0.1 + 1e-9 && std::abs(e.range_m - x.range) <= 0.2 + 1e-9 &&
                  std::abs(e.velocity_mps - x.velocity) <= vel_step + 0.005;
        checks.push_back({{"stage", "refined"}, {"angle_deg", x.angle}, {"range_m", x.range}, {"velocity_mps", x.velocity}, {"ok", ok}});
        all_ok &= ok;
    }
    json body{{"config", cfg}, {"scene", scene}, {"estimates", r.estimates}, {"checks", checks}, {"passed", all_ok}};
    write_json(out / "table2_check.json", body, cfg, c.seed);

    std::cout << "reproduce-table2: " << r.estimates.coarse.size() << " coarse, " << r.estimates.refined.size()
              << " refined, " << r.estimates.failures.size() << " failed bins, comparison "
              << (all_ok ? "pass" : "FAIL") << "\n";
    return all_ok ? 0 : 1;
}

}  // namespace

std::string config_hash(const SystemConfig& cfg)
{
    const std::string canonical = json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

SystemConfig apply_overrides(SystemConfig cfg, const std::vector<std::string>& overrides)
{
    json j = cfg;
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + kv + "' is not key=value");
        const std::string key = kv.substr(0, eq);
        if (!j.contains(key)) throw ConfigError("unknown config key '" + key + "'");
        try {
            j[key] = json::parse(kv.substr(eq + 1));
        } catch (const json::parse_error&) {
            throw ConfigError("override '" + kv + "': value is not a number or boolean");
        }
    }
    try {
        return j.get<SystemConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("override type mismatch: ") + e.what());
    }
}

int run_cli(const std::vector<std::string>& args)
{
    CLI::App app{"TMA-OFDM secure DFRC simulation and estimation"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    Common common;
    DmArgs dm;
    EstimateArgs est;
    BerArgs ber;
    Table2Args t2;

    auto* dm_cmd = app.add_subcommand("dm-check", "Check the directional-modulation condition of the switching pattern");
    add_common(dm_cmd, common, false);
    dm_cmd->add_option("--probes", dm.probes, "Random probe directions")->capture_default_str();
    dm_cmd->add_option("--duty", dm.duty, "Override every antenna's on-duration (1 disables time modulation)");

    auto* sim_cmd = app.add_subcommand("simulate", "Simulate radar returns and write binary grid fixtures");
    add_common(sim_cmd, common, true);

    auto* est_cmd = app.add_subcommand("estimate", "Run coarse and refined estimation on a received grid");
    add_common(est_cmd, common, false);
    est_cmd->add_option("--grid", est.grid_path, "Received antenna grid file")->required();
    est_cmd->add_option("--data", est.data_path, "Transmitted data symbol grid file")->required();
    est_cmd->add_option("--pattern", est.pattern_path, "Switching pattern JSON (default: designed for the CU angle)");
    est_cmd->add_flag("--full-frame", est.full_frame, "Use every OFDM symbol as MUSIC snapshots");

    auto* ber_cmd = app.add_subcommand("ber-sweep", "Eavesdropper BER versus direction");
    add_common(ber_cmd, common, false);
    ber_cmd->add_option("--snr-db", ber.snr_db, "Link SNR (default: config snr_db)");
    ber_cmd->add_option("--frames", ber.frames, "Frames per angle")->capture_default_str();
    ber_cmd->add_option("--angle-min", ber.angle_min)->capture_default_str();
    ber_cmd->add_option("--angle-max", ber.angle_max)->capture_default_str();
    ber_cmd->add_option("--angle-step", ber.angle_step)->capture_default_str();
    ber_cmd->add_option("--order", ber.order, "Constellation order: 4, 16 or 64")->capture_default_str();
    ber_cmd->add_option("--threads", ber.threads, "Worker threads (0: all cores)")->capture_default_str();

    auto* t2_cmd = app.add_subcommand("reproduce-table2", "Reproduce the three-target coarse/refined estimation table");
    add_common(t2_cmd, common, true);
    t2_cmd->add_flag("--full-frame", t2.full_frame, "Use every OFDM symbol as MUSIC snapshots");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::vector<std::string> rest(args.empty() ? args.begin() : args.begin() + 1, args.end());
    try {
        int code = 2;
        std::string name;
        if (dm_cmd->parsed()) name = "dm-check", code = cmd_dm_check(common, dm);
        else if (sim_cmd->parsed()) name = "simulate", code = cmd_simulate(common);
        else if (est_cmd->parsed()) name = "estimate", code = cmd_estimate(common, est);
        else if (ber_cmd->parsed()) name = "ber-sweep", code = cmd_ber_sweep(common, ber);
        else if (t2_cmd->parsed()) name = "reproduce-table2", code = cmd_reproduce_table2(common, t2);
        write_run_meta(fs::path(common.out_dir), name, rest);
        return code;
    } catch (const EstimationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const GridFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace tmadfrc
