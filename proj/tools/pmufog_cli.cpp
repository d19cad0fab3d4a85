// pmufog command line: generate | detect | simulate | sweep | report

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "pmufog/pmufog.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace pmufog;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitProperty = 3;

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::string hex;
    char b[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(b, sizeof b, "%02x", md[i]);
        hex += b;
    }
    return hex;
}

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(s);
    while (std::getline(is, cell, sep)) {
        if (!trim(cell).empty()) out.push_back(trim(cell));
    }
    return out;
}

/// "5ms", "0.005s", "500us"; a bare number is seconds.
double parse_seconds(const std::string& text) {
    const std::string s = trim(text);
    double scale = 1.0;
    std::string num = s;
    if (s.ends_with("ms")) {
        scale = 1e-3;
        num = s.substr(0, s.size() - 2);
    } else if (s.ends_with("us")) {
        scale = 1e-6;
        num = s.substr(0, s.size() - 2);
    } else if (s.ends_with("s")) {
        num = s.substr(0, s.size() - 1);
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(num, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != num.size()) throw ConfigError("cannot parse time value '" + text + "'");
    return v * scale;
}

/// "2ms..20ms" (1 ms steps), "2ms..20ms:2ms", or a list "5ms,10ms".
std::vector<double> parse_timeouts(const std::string& text) {
    std::vector<double> out;
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
        for (const auto& part : split(text, ',')) out.push_back(parse_seconds(part));
    } else {
        std::string rest = text.substr(dots + 2);
        double step = 1e-3;
        if (const auto colon = rest.find(':'); colon != std::string::npos) {
            step = parse_seconds(rest.substr(colon + 1));
            rest = rest.substr(0, colon);
        }
        const double lo = parse_seconds(text.substr(0, dots)), hi = parse_seconds(rest);
        if (!(step > 0) || hi < lo) throw ConfigError("bad timeout range '" + text + "'");
        const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + step * static_cast<double>(i));
    }
    if (out.empty()) throw ConfigError("no timeout values in '" + text + "'");
    for (const double t : out) {
        if (!(t >= 0)) throw ConfigError("timeouts must be >= 0");
    }
    return out;
}

/// "1..7" or "1,3,5".
std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const auto lo = std::stoul(text.substr(0, dots)), hi = std::stoul(text.substr(dots + 2));
        for (auto i = lo; i <= hi; ++i) out.push_back(i);
    } else {
        for (const auto& p : split(text, ',')) out.push_back(std::stoul(p));
    }
    if (out.empty() || std::find(out.begin(), out.end(), 0u) != out.end()) {
        throw ConfigError("training sizes must be >= 1");
    }
    return out;
}

std::vector<int> parse_features(const std::string& text) {
    std::vector<int> out;
    for (const auto& p : split(text, ',')) out.push_back(std::stoi(p));
    return out;
}

std::string fixed(double v, int digits = 6) { return io::fixed(v, digits); }

// Option plumbing: each option is bound to a variable and a config key. The effective
// configuration is defaults, then the --config file, then flags given on the command line.
struct Field {
    std::string key;
    CLI::Option* opt = nullptr;
    std::function<json()> value;
};

struct Command {
    std::string name;
    CLI::App* app = nullptr;
    std::vector<Field> fields;
    json defaults;
    std::string config_path;
    std::string out;

    template <typename T>
    CLI::Option* add(const std::string& flag, const std::string& key, T& var, const std::string& help) {
        auto* o = app->add_option(flag, var, help)->capture_default_str();
        fields.push_back({key, o, [&var] { return json(var); }});
        return o;
    }

    void snapshot_defaults() {
        for (const auto& f : fields) defaults[f.key] = f.value();
    }

    json effective() const {
        json eff = defaults;
        if (!config_path.empty()) {
            const auto file = json::parse(io::read_file(config_path));
            if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
            for (const auto& [k, v] : file.items()) {
                if (!eff.contains(k)) throw ConfigError("unknown config key '" + k + "' for " + name);
                eff[k] = v;
            }
        }
        for (const auto& f : fields) {
            if (f.opt->count() > 0) eff[f.key] = f.value();
        }
        return eff;
    }
};

void write_manifest(const std::string& subcommand, const std::string& config_path, const json& eff,
                    const fs::path& out) {
    json m;
    m["subcommand"] = subcommand;
    m["config"] = config_path.empty() ? json(nullptr) : json(config_path);
    m["config_hash"] = sha256_hex(config_path.empty() ? eff.dump() : io::read_file(config_path));
    m["seed"] = eff.at("seed");
    m["out"] = out.string();
    m["version"] = PMUFOG_VERSION;
    m["effective_config"] = eff;
    io::write_atomic(out / "manifest.json", m.dump(2) + "\n");
}

// ---- generate

int run_generate(const json& c, const fs::path& out) {
    const auto n = c.at("per_fault").get<std::size_t>();
    const auto ds = signalgen::generate_dataset(n, c.at("noise").get<double>(), c.at("seed").get<std::uint64_t>());
    const auto files = io::write_dataset(out, ds, io::parse_format(c.at("format").get<std::string>()));
    std::cout << "wrote " << files.size() << " records to " << out.string() << "\n";
    return kExitOk;
}

// ---- detect

ssa::TargetPolicy parse_policy(const std::string& s) {
    if (s == "fixed") return ssa::TargetPolicy::FixedStart;
    if (s == "sliding") return ssa::TargetPolicy::Sliding;
    if (s == "streaming") return ssa::TargetPolicy::Streaming;
    throw ConfigError("unknown target policy '" + s + "' (fixed|sliding|streaming)");
}

json rates_json(const evaluation::ClassRates& r) {
    json j{{"records", r.records}, {"fpr", r.fpr}};
    j["tpr"] = r.tpr ? json(*r.tpr) : json(nullptr);
    return j;
}

json report_json(const evaluation::Report& rep) {
    json j;
    for (const auto& [fault, r] : rep.per_class) j["per_class"][std::string(signalgen::to_string(fault))] = rates_json(r);
    j["faults"] = rates_json(rep.faults);
    j["normal"] = rates_json(rep.normal);
    return j;
}

std::vector<signalgen::WaveformRecord> normals_of(const std::vector<signalgen::WaveformRecord>& ds) {
    std::vector<signalgen::WaveformRecord> out;
    for (const auto& r : ds) {
        if (r.fault == signalgen::FaultType::None) out.push_back(r);
    }
    return out;
}

/// First n records of every class present.
std::vector<signalgen::WaveformRecord> take_per_class(const std::vector<signalgen::WaveformRecord>& ds, std::size_t n) {
    std::map<signalgen::FaultType, std::size_t> taken;
    std::vector<signalgen::WaveformRecord> out;
    for (const auto& r : ds) {
        if (taken[r.fault]++ < n) out.push_back(r);
    }
    return out;
}

int detect_ssa(const json& c, const fs::path& out, io::Format fmt) {
    ssa::SsaConfig cfg;
    cfg.N = c.at("N").get<int>();
    cfg.M = c.at("M").get<int>();
    cfg.p = c.at("p").get<int>();
    cfg.q = c.at("q").get<int>();
    cfg.l = c.at("l").get<int>();
    cfg.threshold_ratio = c.at("threshold_ratio").get<double>();
    cfg.target_policy = parse_policy(c.at("policy").get<std::string>());
    ssa::validate(cfg);
    const std::string cal = c.at("calibration").get<std::string>();
    if (cal.empty()) throw ConfigError("ssa needs --calibration <dataset dir> with normal records");
    const auto normals = normals_of(io::load_dataset(cal));
    if (normals.empty()) throw CalibrationError("calibration dataset " + cal + " has no normal records");
    cfg.baseline_distance = ssa::calibrate_baseline(normals, cfg);

    json summary{{"method", "ssa"}, {"baseline_distance", *cfg.baseline_distance}, {"threshold_ratio", cfg.threshold_ratio}};
    if (const auto input = c.at("input").get<std::string>(); !input.empty()) {
        const auto rec = io::parse_record_csv(io::read_file(input), input);
        const auto series = ssa::detect(rec, cfg);
        io::write_table(out, "detections", io::detection_csv(series), fmt);
        const auto flagged = std::count_if(series.points.begin(), series.points.end(), [](const auto& p) { return p.is_anomaly; });
        summary["points"] = series.points.size();
        summary["flagged"] = flagged;
    }
    if (const auto data = c.at("data").get<std::string>(); !data.empty()) {
        const auto ds = io::load_dataset(data);
        std::string rows = "record,fault,detected,false_alarm,max_ratio\n";
        std::vector<evaluation::RecordOutcome> outcomes;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto series = ssa::detect(ds[i], cfg);
            const auto o = evaluation::score_record(ds[i], ssa::flagged_ranges(series, cfg.threshold_ratio),
                                                    ssa::guard_samples(cfg));
            outcomes.push_back(o);
            double peak = 0.0;
            for (const auto& p : series.points) peak = std::max(peak, p.normalized);
            rows += std::to_string(i) + "," + std::string(signalgen::to_string(o.fault)) + "," +
                    (o.detected ? "1" : "0") + "," + (o.false_alarm ? "1" : "0") + "," + fixed(peak) + "\n";
        }
        io::write_table(out, "records", rows, fmt);
        summary["rates"] = report_json(evaluation::summarize(outcomes));

        const auto grid = evaluation::log_grid(c.at("roc_min").get<double>(), c.at("roc_max").get<double>(),
                                               c.at("roc_points").get<std::size_t>());
        const auto curve = ssa::roc(ds, cfg, grid);
        std::string roc = "threshold_ratio,tpr,fpr\n";
        for (const auto& p : curve) roc += fixed(p.threshold) + "," + fixed(p.tpr) + "," + fixed(p.fpr) + "\n";
        io::write_table(out, "roc", roc, fmt);
        const auto best = evaluation::best_point(curve);
        summary["roc_best"] = {{"threshold_ratio", best.threshold}, {"tpr", best.tpr}, {"fpr", best.fpr}};
    }
    if (!summary.contains("rates") && !summary.contains("points")) throw ConfigError("detect needs --data or --input");
    io::write_atomic(out / "detect_summary.json", summary.dump(2) + "\n");
    return kExitOk;
}

int detect_knn(const json& c, const fs::path& out, io::Format fmt) {
    knn::KnnConfig cfg;
    cfg.k = c.at("k").get<int>();
    cfg.selected_features = parse_features(c.at("features").get<std::string>());
    knn::validate(cfg);

    const std::string model_path = c.at("model").get<std::string>();
    const std::string train_dir = c.at("train").get<std::string>();
    if (model_path.empty() && train_dir.empty()) throw ConfigError("knn needs --train <dataset dir> or --model <file>");
    const auto data = c.at("data").get<std::string>();
    const auto input = c.at("input").get<std::string>();
    if (data.empty() && input.empty()) throw ConfigError("detect needs --data or --input");

    json summary{{"method", "knn"}, {"k", cfg.k}, {"features", cfg.selected_features}};
    std::optional<knn::KnnModel> model;
    std::vector<signalgen::WaveformRecord> training;
    if (!model_path.empty()) {
        model = io::model_from_json(json::parse(io::read_file(model_path)));
    } else {
        training = io::load_dataset(train_dir);
        model = knn::train(take_per_class(training, c.at("train_size").get<std::size_t>()), cfg);
        io::write_atomic(out / "model.json", io::model_json(*model).dump() + "\n");
    }

    if (!input.empty()) {
        const auto rec = io::parse_record_csv(io::read_file(input), input);
        std::string rows = "window_start_s,label,margin\n";
        for (const auto& [w, cl] : knn::classify_record(*model, rec)) {
            rows += io::fixed(rec.timestamps[w.begin]) + "," + std::string(knn::to_string(cl.label)) + "," +
                    fixed(cl.margin) + "\n";
        }
        io::write_table(out, "windows", rows, fmt);
    }
    if (!data.empty()) {
        const auto ds = io::load_dataset(data);
        summary["rates"] = report_json(knn::evaluate(*model, ds));
        if (!training.empty()) {
            std::string rows = "train_per_class,training_windows,tpr,fpr,normal_fpr\n";
            for (const auto n : parse_sizes(c.at("sizes").get<std::string>())) {
                const auto m = knn::train(take_per_class(training, n), cfg);
                const auto rep = knn::evaluate(m, ds);
                rows += std::to_string(n) + "," + std::to_string(m.points.size()) + "," +
                        fixed(rep.faults.tpr.value_or(0.0)) + "," + fixed(rep.faults.fpr) + "," + fixed(rep.normal.fpr) + "\n";
            }
            io::write_table(out, "knn_sweep", rows, fmt);
        }
    }
    io::write_atomic(out / "detect_summary.json", summary.dump(2) + "\n");
    return kExitOk;
}

int run_detect(const json& c, const fs::path& out) {
    const auto fmt = io::parse_format(c.at("format").get<std::string>());
    const auto method = c.at("method").get<std::string>();
    if (method == "ssa") return detect_ssa(c, out, fmt);
    if (method == "knn") return detect_knn(c, out, fmt);
    throw ConfigError("unknown detection method '" + method + "' (ssa|knn)");
}

// ---- simulate / sweep

netsim::Built scenario_from(const json& c) {
    netsim::TopologyOptions topo;
    if (c.contains("distances")) {
        const auto d = c.at("distances").get<std::string>();
        if (!d.empty()) {
            topo.distances_km.clear();
            for (const auto& p : split(d, ',')) topo.distances_km.push_back(std::stod(p));
        }
    }
    auto b = netsim::build_scenario(c.at("scenario").get<int>(), topo);
    auto& s = b.scenario;
    s.seed = c.at("seed").get<std::uint64_t>();
    s.duration_s = c.at("duration").get<double>();
    s.detector = netsim::parse_detector(c.at("detector").get<std::string>());
    s.event.noise_level = c.at("noise").get<double>();
    s.event.onset_s = c.at("event_onset").get<double>();
    s.t_to_s = parse_seconds(c.at("pdc_timeout").get<std::string>());
    return b;
}

std::vector<bool> qos_settings(const std::string& q) {
    if (q == "on") return {true};
    if (q == "off") return {false};
    if (q == "both") return {false, true};
    throw ConfigError("--qos must be on, off or both");
}

int finish(const std::vector<metrics::Property>& props) {
    bool ok = true;
    for (const auto& p : props) {
        if (!p.pass) {
            ok = false;
            std::cerr << "property failed: " << p.name << (p.detail.empty() ? "" : " (" + p.detail + ")") << "\n";
        }
    }
    std::cout << props.size() << " properties checked, " << (ok ? "all pass" : "some failed") << "\n";
    return ok ? kExitOk : kExitProperty;
}

int run_simulate(const json& c, const fs::path& out) {
    const auto fmt = io::parse_format(c.at("format").get<std::string>());
    const auto tto = parse_timeouts(c.at("tto").get<std::string>());
    const auto built = scenario_from(c);
    metrics::ScenarioRuns runs{built.scenario.id, std::nullopt, std::nullopt};
    for (const bool qos : qos_settings(c.at("qos").get<std::string>())) {
        auto sc = built.scenario;
        sc.qos_enabled = qos;
        auto r = netsim::run(built.topology, sc);
        if (c.at("event_log").get<bool>()) {
            std::ostringstream log;
            netsim::write_event_log(log, r);
            io::write_atomic(out / ("events_s" + std::to_string(sc.id) + (qos ? "_qos" : "_no_qos") + ".csv"), log.str());
        }
        (qos ? runs.with_qos : runs.without_qos) = std::move(r);
    }
    const std::vector<metrics::ScenarioRuns> all{std::move(runs)};
    return finish(metrics::report(all, tto, out, fmt));
}

int run_sweep(const json& c, const fs::path& out) {
    const auto fmt = io::parse_format(c.at("format").get<std::string>());
    const auto tto = parse_timeouts(c.at("tto").get<std::string>());
    const auto built = scenario_from(c);
    std::string rows = "t_to_ms,qos,completeness,mean_ete_ms,mean_alignment_wait_ms\n";
    metrics::ScenarioRuns last{built.scenario.id, std::nullopt, std::nullopt};
    for (const bool qos : qos_settings(c.at("qos").get<std::string>())) {
        for (const double t : tto) {
            auto sc = built.scenario;
            sc.qos_enabled = qos;
            sc.t_to_s = t;
            auto r = netsim::run(built.topology, sc);
            const auto comp = metrics::completeness(r, std::vector<double>{t});
            double ete = 0.0, wait = 0.0;
            std::size_t n = 0;
            for (const auto& f : metrics::frame_delays(r)) {
                ete += f.ete_s;
                wait += f.alignment_wait_s;
                ++n;
            }
            rows += fixed(1e3 * t) + "," + (qos ? "on" : "off") + "," +
                    (comp.points.empty() ? std::string() : fixed(comp.points.front().completeness, 9)) + "," +
                    (n ? fixed(1e3 * ete / static_cast<double>(n)) : std::string()) + "," +
                    (n ? fixed(1e3 * wait / static_cast<double>(n)) : std::string()) + "\n";
            if (t == tto.back()) (qos ? last.with_qos : last.without_qos) = std::move(r);
        }
    }
    io::write_table(out, "sweep_s" + std::to_string(built.scenario.id), rows, fmt);
    const std::vector<metrics::ScenarioRuns> all{std::move(last)};
    return finish(metrics::report(all, tto, out, fmt));
}

using Runner = std::function<int(const json&, const fs::path&)>;

const std::map<std::string, Runner>& runners() {
    static const std::map<std::string, Runner> r{
        {"generate", run_generate}, {"detect", run_detect}, {"simulate", run_simulate}, {"sweep", run_sweep}};
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PMU anomaly detection and fog QoS network simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(PMUFOG_VERSION));

    std::vector<Command> commands;
    commands.reserve(5);
    auto make = [&](const std::string& name, const std::string& help) -> Command& {
        commands.push_back({});
        Command& c = commands.back();
        c.name = name;
        c.app = app.add_subcommand(name, help);
        c.app->add_option("--config", c.config_path, "JSON file with option values")->check(CLI::ExistingFile);
        c.app->add_option("--out", c.out, "output directory")->required();
        return c;
    };

    std::uint64_t seed[4] = {1, 1, 1, 1};
    std::string format[4] = {"csv", "csv", "csv", "csv"};
    auto add_common = [&](Command& c, std::size_t i) {
        c.add("--seed", "seed", seed[i], "master seed");
        c.add("--format", "format", format[i], "table format: csv or json")->check(CLI::IsMember({"csv", "json"}));
    };

    // generate
    std::size_t per_fault = 37;
    double gen_noise = 0.05;
    auto& gen = make("generate", "write a labeled synthetic waveform dataset");
    add_common(gen, 0);
    gen.add("--per-fault", "per_fault", per_fault, "records per fault type (and normal records)");
    gen.add("--noise", "noise", gen_noise, "noise level as a fraction of nominal amplitude");

    // detect
    ssa::SsaConfig ssa_defaults;
    std::string policy = "fixed";
    std::string method = "ssa", data, calibration, train, input, model, features = "6,8,9,10", sizes = "1..7";
    double threshold = ssa_defaults.threshold_ratio, roc_min = 0.5, roc_max = 100.0;
    std::size_t roc_points = 40, train_size = 5;
    int k = 5;
    auto& det = make("detect", "run the SSA or KNN detector over a dataset or a single record");
    add_common(det, 1);
    det.add("method", "method", method, "ssa or knn")->check(CLI::IsMember({"ssa", "knn"}));
    det.add("--data", "data", data, "dataset directory to evaluate");
    det.add("--input", "input", input, "single record CSV (t,v) to scan");
    det.add("--calibration", "calibration", calibration, "ssa: dataset whose normal records set the baseline");
    det.add("--threshold", "threshold_ratio", threshold, "ssa: anomaly threshold as a multiple of the baseline");
    det.add("--N", "N", ssa_defaults.N, "ssa: target series length");
    det.add("--M", "M", ssa_defaults.M, "ssa: embedding window length");
    det.add("--p", "p", ssa_defaults.p, "ssa: first test column offset");
    det.add("--q", "q", ssa_defaults.q, "ssa: last test column offset");
    det.add("--l", "l", ssa_defaults.l, "ssa: subspace dimension");
    det.add("--policy", "policy", policy, "ssa: target policy fixed, sliding or streaming");
    det.add("--roc-min", "roc_min", roc_min, "ssa: smallest threshold ratio in the ROC sweep");
    det.add("--roc-max", "roc_max", roc_max, "ssa: largest threshold ratio in the ROC sweep");
    det.add("--roc-points", "roc_points", roc_points, "ssa: number of ROC thresholds");
    det.add("--train", "train", train, "knn: training dataset directory");
    det.add("--model", "model", model, "knn: saved model JSON instead of training");
    det.add("--k", "k", k, "knn: neighbour count");
    det.add("--features", "features", features, "knn: 1-based feature indices");
    det.add("--train-size", "train_size", train_size, "knn: training records per class for the saved model");
    det.add("--sizes", "sizes", sizes, "knn: training sizes to sweep, e.g. 1..7");

    // simulate and sweep share scenario options
    struct SimOpts {
        int scenario = 1;
        std::string qos = "both", tto, pdc_timeout = "50ms", detector = "ssa", distances;
        double duration = 10.0, noise = 0.05, event_onset = 1.0;
        bool event_log = true;
    };
    SimOpts sim, swp;
    sim.tto = "2ms..20ms";
    swp.tto = "2ms..20ms";
    auto add_sim = [&](Command& c, SimOpts& o, std::size_t i) {
        add_common(c, i);
        c.add("--scenario", "scenario", o.scenario, "scenario id: 1, 2 or 3");
        c.add("--qos", "qos", o.qos, "on, off or both")->check(CLI::IsMember({"on", "off", "both"}));
        c.add("--tto", "tto", o.tto, "PDC timeouts, e.g. 5ms,10ms or 2ms..20ms[:1ms]");
        c.add("--duration", "duration", o.duration, "simulated seconds of PMU traffic");
        c.add("--detector", "detector", o.detector, "fog detector: ssa, knn, oracle or none");
        c.add("--noise", "noise", o.noise, "waveform noise level");
        c.add("--event-onset", "event_onset", o.event_onset, "grid fault onset, seconds");
        c.add("--distances", "distances", o.distances, "PMU path lengths in km, comma separated");
    };
    auto& simc = make("simulate", "simulate a scenario and report delay and completeness");
    add_sim(simc, sim, 2);
    simc.add("--pdc-timeout", "pdc_timeout", sim.pdc_timeout, "timeout used by the PDC during the run");
    simc.add("--event-log", "event_log", sim.event_log, "write the per-hop event log");
    auto& swpc = make("sweep", "rerun a scenario for each PDC timeout");
    add_sim(swpc, swp, 3);
    swpc.fields.push_back({"pdc_timeout", nullptr, [] { return json("50ms"); }});
    swpc.fields.push_back({"event_log", nullptr, [] { return json(false); }});

    // report
    std::string manifest_path, report_out;
    auto* rep = app.add_subcommand("report", "rerun the command recorded in a manifest and rewrite its outputs");
    rep->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", report_out, "output directory")->required();

    for (auto& c : commands) c.snapshot_defaults();
    // Sweep fields without a flag only contribute defaults.
    for (auto& c : commands) {
        std::erase_if(c.fields, [](const Field& f) { return f.opt == nullptr; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        std::string subcommand;
        json eff;
        fs::path out;
        std::string config_path;
        if (rep->parsed()) {
            const auto m = json::parse(io::read_file(manifest_path));
            subcommand = m.at("subcommand").get<std::string>();
            eff = m.at("effective_config");
            if (m.value("version", std::string()) != PMUFOG_VERSION) {
                std::cerr << "warning: manifest was written by version " << m.value("version", std::string("?")) << "\n";
            }
            out = report_out;
        } else {
            for (auto& c : commands) {
                if (!c.app->parsed()) continue;
                subcommand = c.name;
                eff = c.effective();
                out = c.out;
                config_path = c.config_path;
            }
        }
        const auto it = runners().find(subcommand);
        if (it == runners().end()) throw ConfigError("manifest names unknown subcommand '" + subcommand + "'");
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec) throw io::IoError("cannot create output directory " + out.string() + ": " + ec.message());
        write_manifest(subcommand, config_path, eff, out);
        return it->second(eff, out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const json::exception& e) {
        std::cerr << "error: bad JSON: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
