#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "cloak/data.hpp"
#include "cloak/detector.hpp"
#include "cloak/errors.hpp"
#include "cloak/evaluation.hpp"
#include "cloak/hash.hpp"
#include "cloak/image_io.hpp"
#include "cloak/losses.hpp"
#include "cloak/pattern.hpp"
#include "cloak/plot.hpp"
#include "cloak/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cloak;

namespace {

constexpr const char* kOutRootEnv = "CLOAK_OUT_ROOT";

// --- config ---------------------------------------------------------------------

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown_keys(j, {"train", "dataset", "adapter", "palette", "out", "pattern",
                            "initial_pattern"},
                        "config");
    if (j.contains("train")) {
        reject_unknown_keys(j["train"],
                            {"learning_rate", "epochs", "batch_size", "architecture",
                             "pattern_resolution", "base_resolution", "seed", "eps", "weights"},
                            "config.train");
        if (j["train"].contains("weights")) {
            reject_unknown_keys(j["train"]["weights"],
                                {"theta_cla", "theta_coord", "theta_wh", "theta_cla2",
                                 "theta_bbox", "alpha_tv", "alpha_print"},
                                "config.train.weights");
        }
    }
    if (j.contains("dataset")) {
        reject_unknown_keys(j["dataset"], {"train_manifest", "val_manifest"}, "config.dataset");
    }
    if (j.contains("adapter")) {
        reject_unknown_keys(j["adapter"],
                            {"name", "family", "checkpoint", "train_if_missing", "epochs", "seed",
                             "learning_rate", "ap_floor", "early_stop_ap"},
                            "config.adapter");
    }
    if (j.contains("pattern")) {
        reject_unknown_keys(j["pattern"], {"size", "mode", "seed", "texture"}, "config.pattern");
    }
    return j;
}

TrainConfig train_config_from_json(const json& root, Architecture fallback_arch) {
    TrainConfig c;
    c.architecture = fallback_arch;
    c.weights = fallback_arch == Architecture::kYolo ? LossWeights::yolo_reference()
                                                     : LossWeights::two_stage_reference();
    if (!root.contains("train")) return c;
    const json& t = root["train"];
    try {
        c.learning_rate = t.value("learning_rate", c.learning_rate);
        c.epochs = t.value("epochs", c.epochs);
        c.batch_size = t.value("batch_size", c.batch_size);
        if (t.contains("architecture")) {
            c.architecture = architecture_from_string(t["architecture"].get<std::string>());
            c.weights = c.architecture == Architecture::kYolo ? LossWeights::yolo_reference()
                                                              : LossWeights::two_stage_reference();
        }
        c.pattern_resolution = t.value("pattern_resolution", c.pattern_resolution);
        c.base_resolution = t.value("base_resolution", c.base_resolution);
        c.seed = t.value("seed", c.seed);
        c.eps = t.value("eps", c.eps);
        if (t.contains("weights")) {
            const json& w = t["weights"];
            c.weights.theta_cla = w.value("theta_cla", c.weights.theta_cla);
            c.weights.theta_coord = w.value("theta_coord", c.weights.theta_coord);
            c.weights.theta_wh = w.value("theta_wh", c.weights.theta_wh);
            c.weights.theta_cla2 = w.value("theta_cla2", c.weights.theta_cla2);
            c.weights.theta_bbox = w.value("theta_bbox", c.weights.theta_bbox);
            c.weights.alpha_tv = w.value("alpha_tv", c.weights.alpha_tv);
            c.weights.alpha_print = w.value("alpha_print", c.weights.alpha_print);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad train config value: ") + e.what());
    }
    c.validate();
    return c;
}

fs::path resolve_out_dir(const std::string& flag_out, const json& config,
                         const std::string& subcommand) {
    if (!flag_out.empty()) return flag_out;
    if (config.contains("out")) return config["out"].get<std::string>();
    if (const char* root = std::getenv(kOutRootEnv)) return fs::path(root) / subcommand;
    return fs::path("cloak-out") / subcommand;
}

Palette resolve_palette(const json& config, std::string* source) {
    if (config.contains("palette") && !config["palette"].is_null()) {
        std::string p = config["palette"].get<std::string>();
        *source = p;
        return load_palette(p);
    }
    *source = "builtin";
    return default_palette();
}

void add_input_hash(json& manifest, const std::string& label, const std::string& path) {
    if (!path.empty() && fs::exists(path)) {
        manifest["inputs"][label] = {{"path", path}, {"fnv", hash_file_hex(path)}};
    }
}

void write_run_manifest(const fs::path& out_dir, const json& manifest) {
    std::ofstream f(out_dir / "run_manifest.json");
    if (!f) throw IoFailure("cannot write run manifest under " + out_dir.string());
    f << manifest.dump(2) << "\n";
}

std::shared_ptr<DetectorAdapter> resolve_adapter(const json& config, const std::string& flag_name,
                                                 const fs::path& out_dir) {
    json a = config.value("adapter", json::object());
    std::string name = flag_name.empty() ? a.value("name", std::string("toy")) : flag_name;
    if (name != "toy") return load_adapter(name, a.value("checkpoint", std::string()));

    std::string ckpt = a.value("checkpoint", (out_dir / "toy_detector.ckpt").string());
    if (fs::exists(ckpt)) {
        return std::make_shared<ToyDetector>(ToyDetector::load_checkpoint(ckpt));
    }
    if (!a.value("train_if_missing", false)) {
        throw AdapterFailure("toy checkpoint not found: " + ckpt +
                             " (set adapter.train_if_missing to build it)");
    }
    if (!config.contains("dataset") || !config["dataset"].contains("train_manifest")) {
        throw ConfigError("adapter.train_if_missing needs dataset.train_manifest");
    }
    DatasetManifest train = load_dataset(config["dataset"]["train_manifest"].get<std::string>());
    std::optional<DatasetManifest> val;
    if (config["dataset"].contains("val_manifest")) {
        val = load_dataset(config["dataset"]["val_manifest"].get<std::string>());
    }
    ToyTrainOptions opts;
    opts.epochs = a.value("epochs", opts.epochs);
    opts.seed = a.value("seed", static_cast<uint64_t>(0));
    opts.learning_rate = a.value("learning_rate", opts.learning_rate);
    opts.ap_floor = a.value("ap_floor", opts.ap_floor);
    opts.early_stop_ap = a.value("early_stop_ap", opts.early_stop_ap);
    if (a.contains("family")) opts.family = family_from_string(a["family"].get<std::string>());
    std::cerr << "training toy detector (" << train.entries.size() << " scenes)...\n";
    ToyDetector det = train_toy_detector(train.entries, val ? &val->entries : nullptr, opts);
    fs::create_directories(fs::path(ckpt).parent_path().empty() ? "." : fs::path(ckpt).parent_path());
    det.save_checkpoint(ckpt);
    std::cerr << "saved toy checkpoint: " << ckpt << "\n";
    return std::make_shared<ToyDetector>(std::move(det));
}

// --- subcommands -------------------------------------------------------------------

int cmd_init_pattern(const std::string& config_path, int size, const std::string& mode,
                     uint64_t seed, const std::string& texture, const std::string& out_flag) {
    json config = config_path.empty() ? json::object() : load_config_file(config_path);
    json p = config.value("pattern", json::object());
    if (size <= 0) size = p.value("size", 400);
    std::string m = mode.empty() ? p.value("mode", std::string("random")) : mode;
    uint64_t s = seed != UINT64_MAX ? seed : p.value("seed", static_cast<uint64_t>(0));
    std::string tex = texture.empty() ? p.value("texture", std::string()) : texture;

    fs::path out = resolve_out_dir(out_flag, config, "init-pattern");
    fs::create_directories(out);

    std::optional<Image> tex_img;
    InitMode im;
    if (m == "random") {
        im = InitMode::kRandom;
    } else if (m == "texture") {
        im = InitMode::kTexture;
        if (tex.empty()) throw ConfigError("texture mode needs --texture");
        tex_img = read_png(tex);
    } else {
        throw ConfigError("mode must be 'random' or 'texture'");
    }

    AdversarialPattern pat = init_pattern(size, im, s, tex_img);
    std::string file = (out / "pattern.png").string();
    export_pattern(pat, file);

    json manifest;
    manifest["command"] = "init-pattern";
    manifest["config"] = {{"size", size}, {"mode", m}, {"seed", s}};
    manifest["pattern_file"] = file;
    add_input_hash(manifest, "texture", tex);
    manifest["pattern_fnv"] = hash_file_hex(file);
    write_run_manifest(out, manifest);
    std::cout << file << "\n";
    return 0;
}

int cmd_synth_data(const std::string& config_path, int n_train, int n_val, uint64_t seed,
                   const std::string& out_flag) {
    json config = config_path.empty() ? json::object() : load_config_file(config_path);
    fs::path out = resolve_out_dir(out_flag, config, "synth-data");
    SynthConfig sc;

    DatasetManifest train = make_synth_dataset("train", n_train, seed, sc);
    DatasetManifest val = make_synth_dataset("val", n_val, seed, sc);
    save_dataset(train, (out / "train").string());
    save_dataset(val, (out / "val").string());

    json manifest;
    manifest["command"] = "synth-data";
    manifest["config"] = {{"n_train", n_train}, {"n_val", n_val}, {"seed", seed},
                          {"image_size", sc.image_size}};
    manifest["train_manifest"] = (out / "train" / "manifest.json").string();
    manifest["val_manifest"] = (out / "val" / "manifest.json").string();
    write_run_manifest(out, manifest);
    std::cout << manifest["train_manifest"].get<std::string>() << "\n"
              << manifest["val_manifest"].get<std::string>() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& adapter_flag,
              const std::string& out_flag) {
    json config = load_config_file(config_path);
    fs::path out = resolve_out_dir(out_flag, config, "train");
    fs::create_directories(out);

    TrainConfig tc = train_config_from_json(config, Architecture::kYolo);
    if (!config.contains("dataset") || !config["dataset"].contains("train_manifest")) {
        throw ConfigError("train needs dataset.train_manifest");
    }
    std::string train_manifest = config["dataset"]["train_manifest"].get<std::string>();
    DatasetManifest dataset = load_dataset(train_manifest);

    std::string palette_source;
    Palette palette = resolve_palette(config, &palette_source);
    auto adapter = resolve_adapter(config, adapter_flag, out);

    std::optional<AdversarialPattern> initial;
    std::string initial_path = config.value("initial_pattern", std::string());
    if (!initial_path.empty()) initial = import_pattern(initial_path);

    TrainResult result = train_pattern(dataset, *adapter, tc, palette, initial);

    std::string pattern_file = (out / "pattern.png").string();
    export_pattern(result.pattern, pattern_file);
    std::string history_file = (out / "loss_history.csv").string();
    write_loss_history(result.loss_history, history_file);

    json manifest = json::parse(result.manifest_json);
    manifest["command"] = "train";
    manifest["pattern_file"] = pattern_file;
    manifest["loss_history_file"] = history_file;
    manifest["palette"] = palette_source;
    add_input_hash(manifest, "train_manifest", train_manifest);
    add_input_hash(manifest, "initial_pattern", initial_path);
    write_run_manifest(out, manifest);

    std::cout << pattern_file << "\n";
    return 0;
}

int cmd_attack(const std::string& pattern_path, const std::string& manifest_path,
               const std::string& out_flag) {
    json config = json::object();
    fs::path out = resolve_out_dir(out_flag, config, "attack");
    fs::create_directories(out / "images");

    AdversarialPattern pat = import_pattern(pattern_path);
    DatasetManifest dataset = load_dataset(manifest_path);

    DatasetManifest attacked = dataset;
    for (auto& e : attacked.entries) e.image = attack_image(e, pat);
    save_dataset(attacked, out.string());

    json manifest;
    manifest["command"] = "attack";
    manifest["count"] = attacked.entries.size();
    add_input_hash(manifest, "pattern", pattern_path);
    add_input_hash(manifest, "dataset_manifest", manifest_path);
    write_run_manifest(out, manifest);
    std::cout << (out / "manifest.json").string() << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& pattern_path, bool no_pattern,
             const std::string& adapter_flag, const std::string& manifest_path,
             const std::string& out_flag) {
    json config = config_path.empty() ? json::object() : load_config_file(config_path);
    if (pattern_path.empty() && !no_pattern) {
        throw Error("UsageError: eval needs --pattern FILE or --no-pattern");
    }
    fs::path out = resolve_out_dir(out_flag, config, "eval");
    fs::create_directories(out);

    std::string mpath = manifest_path;
    if (mpath.empty() && config.contains("dataset") && config["dataset"].contains("val_manifest")) {
        mpath = config["dataset"]["val_manifest"].get<std::string>();
    }
    if (mpath.empty()) throw ConfigError("eval needs --manifest or dataset.val_manifest");
    DatasetManifest dataset = load_dataset(mpath);

    auto adapter = resolve_adapter(config, adapter_flag, out);

    std::optional<AdversarialPattern> pattern;
    if (!pattern_path.empty()) pattern = import_pattern(pattern_path);

    MetricsReport report = evaluate_attack(*adapter, dataset, pattern);
    if (pattern) report.pattern_id = pattern_path;

    std::string report_file = (out / "report.json").string();
    save_report(report, report_file);
    std::string table = format_report_table(report);
    std::ofstream(out / "report.txt") << table;

    json manifest;
    manifest["command"] = "eval";
    manifest["report_file"] = report_file;
    manifest["adapter"] = adapter->name();
    manifest["adapter_checksum"] = to_hex(adapter->weights_checksum());
    add_input_hash(manifest, "dataset_manifest", mpath);
    add_input_hash(manifest, "pattern", pattern_path);
    write_run_manifest(out, manifest);

    std::cout << table;
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& loss_history,
               const std::string& out_flag) {
    json config = json::object();
    fs::path out = resolve_out_dir(out_flag, config, "report");
    fs::create_directories(out);

    json manifest;
    manifest["command"] = "report";

    MetricsReport merged;
    if (!inputs.empty()) {
        std::vector<MetricsReport> reports;
        for (const auto& p : inputs) {
            reports.push_back(load_report(p));
            add_input_hash(manifest, p, p);
        }
        merged = merge_reports(reports);
        save_report(merged, (out / "merged_report.json").string());
        std::ofstream(out / "report.txt") << format_report_table(merged);
        std::ofstream(out / "resolution_table.txt") << format_resolution_table(merged);
    }
    emit_plots(loss_history, inputs.empty() ? "" : (out / "merged_report.json").string(),
               out.string());
    add_input_hash(manifest, "loss_history", loss_history);
    write_run_manifest(out, manifest);
    if (!inputs.empty()) std::cout << format_report_table(merged);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial garment pattern toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, adapter_name, pattern_path, manifest_path, texture_path;
    std::string mode, loss_history;
    std::vector<std::string> report_inputs;
    int size = -1, n_train = 200, n_val = 50;
    uint64_t seed = UINT64_MAX;
    bool no_pattern = false;

    auto* init = app.add_subcommand("init-pattern", "create a pattern image");
    init->add_option("--size", size, "pattern side length");
    init->add_option("--mode", mode, "random | texture");
    init->add_option("--seed", seed, "rng seed");
    init->add_option("--texture", texture_path, "texture image for texture mode");
    init->add_option("--config", config_path, "config file");
    init->add_option("--out", out_dir, "output directory");

    auto* synth = app.add_subcommand("synth-data", "generate synthetic scenes");
    synth->add_option("--n-train", n_train, "training scenes");
    synth->add_option("--n-val", n_val, "validation scenes");
    synth->add_option("--seed", seed, "rng seed");
    synth->add_option("--config", config_path, "config file");
    synth->add_option("--out", out_dir, "output directory");

    auto* train = app.add_subcommand("train", "optimize a pattern against a detector");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--adapter", adapter_name, "adapter name override");
    train->add_option("--out", out_dir, "output directory");

    auto* attack = app.add_subcommand("attack", "composite a pattern onto a dataset");
    attack->add_option("--pattern", pattern_path, "pattern image")->required();
    attack->add_option("--manifest", manifest_path, "dataset manifest")->required();
    attack->add_option("--out", out_dir, "output directory");

    auto* eval = app.add_subcommand("eval", "measure AP with and without the pattern");
    eval->add_option("--config", config_path, "config file");
    eval->add_option("--pattern", pattern_path, "pattern image");
    eval->add_flag("--no-pattern", no_pattern, "evaluate clean images");
    eval->add_option("--adapter", adapter_name, "adapter name override");
    eval->add_option("--manifest", manifest_path, "dataset manifest");
    eval->add_option("--out", out_dir, "output directory");

    auto* report = app.add_subcommand("report", "merge reports and emit tables/plots");
    report->add_option("--inputs", report_inputs, "report JSON files");
    report->add_option("--loss-history", loss_history, "loss history CSV");
    report->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: UsageError: " << e.what() << "\n";
        std::cerr << app.help() << "\n";
        return 2;
    }

    try {
        if (init->parsed()) {
            uint64_t s = seed;
            return cmd_init_pattern(config_path, size, mode, s, texture_path, out_dir);
        }
        if (synth->parsed()) {
            return cmd_synth_data(config_path, n_train, n_val, seed == UINT64_MAX ? 0 : seed,
                                  out_dir);
        }
        if (train->parsed()) return cmd_train(config_path, adapter_name, out_dir);
        if (attack->parsed()) return cmd_attack(pattern_path, manifest_path, out_dir);
        if (eval->parsed()) {
            return cmd_eval(config_path, pattern_path, no_pattern, adapter_name, manifest_path,
                            out_dir);
        }
        if (report->parsed()) return cmd_report(report_inputs, loss_history, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SchemaViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        if (msg.rfind("UsageError", 0) == 0) {
            std::cerr << "error: " << msg << "\n";
            return 2;
        }
        std::cerr << "error: RuntimeFailure: " << msg << "\n";
        return 1;
    }
    return 0;
}
