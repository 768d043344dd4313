// uasim command-line front end: dataset generation, training,
// fine-tuning, conditional generation, metrics/BER evaluation, replay
// baselines and NLMS sounding. Every run writes a manifest JSON with the
// resolved config and output checksums.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "uasim/autoencoder.hpp"
#include "uasim/channel_sim.hpp"
#include "uasim/config.hpp"
#include "uasim/diffusion.hpp"
#include "uasim/latents.hpp"
#include "uasim/metrics.hpp"
#include "uasim/ofdm.hpp"
#include "uasim/probe.hpp"
#include "uasim/replay.hpp"
#include "uasim/uatv.hpp"

namespace fs = std::filesystem;
using namespace uasim;

namespace {

constexpr int kExitUnknownCommand = 2;
constexpr int kExitInvalidConfig = 3;
constexpr int kExitMissingCheckpoint = 4;

struct MissingCheckpoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Checkpoint load_checkpoint_required(const std::string& path) {
    if (!fs::exists(path)) throw MissingCheckpoint("checkpoint not found: " + path);
    return load_checkpoint(path);
}

// Config resolution order: file, then --set overrides, then dedicated flags.
KeyValueConfig resolve_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
    KeyValueConfig cfg;
    if (!config_path.empty()) cfg = KeyValueConfig::load(config_path);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("--set expects key=value, got: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

uint64_t require_seed(const KeyValueConfig& cfg) {
    if (!cfg.has("seed")) throw InvalidInput("config: seed is mandatory for this command");
    return cfg.get_u64("seed", 0);
}

std::string manifest_path(const std::string& primary_output) {
    return primary_output + ".manifest.json";
}

// The straightening anchor defaults to tap 20 but must stay inside small
// delay windows.
size_t default_anchor(size_t D) { return std::min<size_t>(20, D / 2); }

// Cuts each record into consecutive T-snapshot windows (normalizing the
// whole record first when asked) and featurizes them. anchor == SIZE_MAX
// picks the default for the record's delay width.
std::vector<FeatureSeq> records_to_sequences(const std::vector<TvirRecord>& records, size_t T,
                                             bool normalize, size_t anchor) {
    std::vector<FeatureSeq> out;
    for (const TvirRecord& rec : records) {
        Tvir tvir = rec.tvir;
        if (normalize)
            tvir = normalize_tvir(tvir, anchor == SIZE_MAX ? default_anchor(tvir.D) : anchor)
                       .first;
        require(tvir.T >= T, "record shorter than the model window");
        const FeatureSeq full = featurize_tvir(tvir);
        for (size_t start = 0; start + T <= tvir.T; start += T) {
            FeatureSeq win(T, tvir.D);
            for (size_t t = 0; t < T; ++t)
                std::copy(full.row(start + t), full.row(start + t) + full.width(), win.row(t));
            out.push_back(std::move(win));
        }
    }
    require(!out.empty(), "no training sequences in input");
    return out;
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> split_validation(std::vector<T> items,
                                                           double val_fraction) {
    require(val_fraction > 0.0 && val_fraction < 1.0, "val_fraction must be in (0, 1)");
    const size_t n_val =
        std::max<size_t>(1, static_cast<size_t>(std::llround(val_fraction *
                                                             static_cast<double>(items.size()))));
    require(n_val < items.size(), "dataset too small to split validation");
    std::vector<T> val(items.end() - static_cast<long>(n_val), items.end());
    items.resize(items.size() - n_val);
    return {std::move(items), std::move(val)};
}

TrainConfig train_config_from(const KeyValueConfig& cfg, double lr_default, int patience_default) {
    TrainConfig tc;
    tc.lr = cfg.get_double("lr", lr_default);
    tc.patience = static_cast<int>(cfg.get_u64("patience", patience_default));
    tc.min_lr = cfg.get_double("min_lr", 1e-6);
    tc.reduction_factor = cfg.get_double("reduction_factor", 10.0);
    tc.batch_size = cfg.get_u64("batch", 64);
    tc.max_epochs = cfg.get_u64("epochs", 500);
    tc.seed = cfg.get_u64("seed", 0);
    tc.log_csv = cfg.get_string("log", "");
    return tc;
}

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    require(!out.empty(), "empty numeric list: " + csv);
    return out;
}

// ---- commands -----------------------------------------------------------------

int cmd_sim_gen(const KeyValueConfig& cfg) {
    DatasetConfig dc;
    dc.count = cfg.get_u64("count", 0);
    dc.paired = cfg.get_bool("paired", false);
    dc.dims.T = cfg.get_u64("T", 20);
    dc.dims.D = cfg.get_u64("D", 250);
    dc.dims.time_step = 1.0 / cfg.get_double("snapshot_rate", 20.0);
    dc.dims.delay_step = 1.0 / cfg.get_double("delay_rate", 12000.0);
    dc.dims.anchor_index = cfg.get_u64("anchor_index", default_anchor(dc.dims.D));
    dc.dynamics.doppler_bandwidth = cfg.get_double("doppler_bandwidth", 1.0);
    dc.dynamics.fading_std = cfg.get_double("fading_std", 0.1);
    dc.dynamics.delay_drift_std = cfg.get_double("delay_drift_std", 0.0);
    dc.max_delay = cfg.get_double("max_delay", 0.018);
    dc.max_bounces = static_cast<int>(cfg.get_u64("max_bounces", 6));
    dc.seed = require_seed(cfg);
    dc.env.sound_speed_min = cfg.get_double("env.sound_speed_min", dc.env.sound_speed_min);
    dc.env.sound_speed_max = cfg.get_double("env.sound_speed_max", dc.env.sound_speed_max);
    dc.env.gradient_std = cfg.get_double("env.gradient_std", dc.env.gradient_std);
    dc.env.depth_min = cfg.get_double("env.depth_min", dc.env.depth_min);
    dc.env.depth_max = cfg.get_double("env.depth_max", dc.env.depth_max);
    dc.env.range_min = cfg.get_double("env.range_min", dc.env.range_min);
    dc.env.range_max = cfg.get_double("env.range_max", dc.env.range_max);
    dc.env.density_min = cfg.get_double("env.density_min", dc.env.density_min);
    dc.env.density_max = cfg.get_double("env.density_max", dc.env.density_max);
    dc.env.rel_speed_min = cfg.get_double("env.rel_speed_min", dc.env.rel_speed_min);
    dc.env.rel_speed_max = cfg.get_double("env.rel_speed_max", dc.env.rel_speed_max);
    dc.env.absorption_min = cfg.get_double("env.absorption_min", dc.env.absorption_min);
    dc.env.absorption_max = cfg.get_double("env.absorption_max", dc.env.absorption_max);
    dc.env.surface_coeff_min = cfg.get_double("env.surface_coeff_min", dc.env.surface_coeff_min);
    dc.env.surface_coeff_max = cfg.get_double("env.surface_coeff_max", dc.env.surface_coeff_max);
    const std::string out = cfg.require_string("out");
    generate_dataset(out, dc);
    write_manifest(manifest_path(out), "sim-gen", cfg, dc.seed, {}, {out});
    std::cout << "wrote " << dc.count << " records to " << out << "\n";
    return 0;
}

int cmd_ae_train(const KeyValueConfig& cfg, bool finetune) {
    const std::string in = cfg.require_string("in");
    const std::string out = cfg.require_string("out");
    const uint64_t seed = require_seed(cfg);
    const bool normalize = cfg.get_bool("normalize", true);
    const size_t anchor = cfg.get_u64("anchor_index", SIZE_MAX);

    Autoencoder<float> model;
    if (finetune) {
        const Checkpoint ck = load_checkpoint_required(cfg.require_string("ckpt"));
        model = Autoencoder<float>::from_checkpoint(ck);
    } else {
        AEConfig ac;
        ac.T = cfg.get_u64("T", 20);
        ac.D = cfg.get_u64("D", 250);
        ac.hidden = cfg.get_u64("hidden", 64);
        ac.latent = cfg.get_u64("latent", 128);
        ac.layers = cfg.get_u64("layers", 3);
        ac.eta = cfg.get_double("eta", 1.0);
        Rng rng(seed, 0xae);
        model.init(ac, rng);
    }

    TrainConfig tc;
    if (finetune && cfg.has("preset")) {
        tc = ae_finetune_preset(cfg.require_string("preset"));
        tc.lr = cfg.get_double("lr", tc.lr);
        tc.patience = static_cast<int>(cfg.get_u64("patience", tc.patience));
        tc.min_lr = cfg.get_double("min_lr", tc.min_lr);
        tc.batch_size = cfg.get_u64("batch", tc.batch_size);
        tc.max_epochs = cfg.get_u64("epochs", tc.max_epochs);
        tc.log_csv = cfg.get_string("log", "");
    } else {
        tc = train_config_from(cfg, finetune ? 1e-4 : 1e-3, finetune ? 5 : 3);
    }
    tc.seed = seed;

    const auto records = load_uatv(in);
    auto sequences = records_to_sequences(records, model.cfg.T, normalize, anchor);
    auto [train, val] = split_validation(std::move(sequences), cfg.get_double("val_fraction", 0.1));
    const TrainResult res = train_autoencoder(model, train, val, tc);
    save_checkpoint(out, model.to_checkpoint());
    write_manifest(manifest_path(out), finetune ? "ae-finetune" : "ae-train", cfg, seed, {in},
                   {out});
    std::cout << (finetune ? "fine-tuned" : "trained") << " autoencoder: " << res.log.size()
              << " epochs, best val loss " << res.best_val << "\n";
    return 0;
}

DiffusionModel<float> init_diffusion_from_config(const KeyValueConfig& cfg, uint64_t seed,
                                                 size_t latent_dim) {
    DiffusionModel<float> model;
    DenoiserConfig dc;
    dc.latent = latent_dim;
    dc.cond = latent_dim;
    dc.temb_dim = cfg.get_u64("temb_dim", 32);
    dc.width = cfg.get_u64("width", 2048);
    Rng rng(seed, 0xd1f);
    model.net.init(dc, rng);
    model.sched = make_schedule(schedule_kind_from_name(cfg.get_string("schedule", "linear")),
                                cfg.get_u64("T_diff", 100), cfg.get_double("beta_min", 1e-4),
                                cfg.get_double("beta_max", 1e-2));
    return model;
}

int cmd_diff_train(const KeyValueConfig& cfg) {
    const std::string in = cfg.require_string("in");
    const std::string ae_path = cfg.require_string("ae");
    const std::string out = cfg.require_string("out");
    const uint64_t seed = require_seed(cfg);
    const bool normalize = cfg.get_bool("normalize", true);
    const size_t anchor = cfg.get_u64("anchor_index", SIZE_MAX);

    const Autoencoder<float> ae =
        Autoencoder<float>::from_checkpoint(load_checkpoint_required(ae_path));
    const auto records = load_uatv(in);

    // Paired records: first half conditions, second half targets.
    std::vector<ConditionPair> pairs;
    for (const TvirRecord& rec : records) {
        Tvir tvir = rec.tvir;
        if (normalize)
            tvir = normalize_tvir(tvir, anchor == SIZE_MAX ? default_anchor(tvir.D) : anchor)
                       .first;
        require(tvir.T >= 2 * ae.cfg.T, "diff-train: records must hold 2T snapshots (paired)");
        const FeatureSeq full = featurize_tvir(tvir);
        auto window = [&](size_t start) {
            FeatureSeq win(ae.cfg.T, tvir.D);
            for (size_t t = 0; t < ae.cfg.T; ++t)
                std::copy(full.row(start + t), full.row(start + t) + full.width(), win.row(t));
            return win;
        };
        ConditionPair p;
        p.z_c = ae.encode(window(0));
        p.z_0 = ae.encode(window(ae.cfg.T));
        pairs.push_back(std::move(p));
    }
    auto [train, val] = split_validation(std::move(pairs), cfg.get_double("val_fraction", 0.1));

    DiffusionModel<float> model = init_diffusion_from_config(cfg, seed, ae.cfg.latent);
    TrainConfig tc = train_config_from(cfg, 1e-3, 5);
    const TrainResult res = train_diffusion(model, train, val, tc);
    save_checkpoint(out, model.to_checkpoint());
    write_manifest(manifest_path(out), "diff-train", cfg, seed, {in, ae_path}, {out});
    std::cout << "trained diffusion: " << res.log.size() << " epochs, best val noise-MSE "
              << res.best_val << "\n";
    return 0;
}

int cmd_diff_finetune(const KeyValueConfig& cfg) {
    const std::string in = cfg.require_string("in");
    const std::string ae_path = cfg.require_string("ae");
    const std::string ckpt = cfg.require_string("ckpt");
    const std::string out = cfg.require_string("out");
    const uint64_t seed = require_seed(cfg);

    const Autoencoder<float> ae =
        Autoencoder<float>::from_checkpoint(load_checkpoint_required(ae_path));
    DiffusionModel<float> model =
        DiffusionModel<float>::from_checkpoint(load_checkpoint_required(ckpt));
    if (cfg.has("schedule") || cfg.has("T_diff") || cfg.has("beta_min") || cfg.has("beta_max")) {
        model.sched = make_schedule(
            schedule_kind_from_name(cfg.get_string("schedule", schedule_kind_name(model.sched.kind))),
            cfg.get_u64("T_diff", model.sched.T_diff),
            cfg.get_double("beta_min", model.sched.beta_min),
            cfg.get_double("beta_max", model.sched.beta_max));
    }

    const auto records = load_uatv(in);
    const auto sequences = records_to_sequences(records, ae.cfg.T, cfg.get_bool("normalize", true),
                                                cfg.get_u64("anchor_index", SIZE_MAX));
    std::vector<std::vector<double>> latents;
    for (const FeatureSeq& h : sequences) latents.push_back(ae.encode(h));

    TrainConfig tc;
    if (cfg.has("preset")) {
        tc = diffusion_finetune_preset(cfg.require_string("preset"));
        tc.lr = cfg.get_double("lr", tc.lr);
        tc.patience = static_cast<int>(cfg.get_u64("patience", tc.patience));
        tc.batch_size = cfg.get_u64("batch", tc.batch_size);
        tc.max_epochs = cfg.get_u64("epochs", tc.max_epochs);
        tc.log_csv = cfg.get_string("log", "");
    } else {
        tc = train_config_from(cfg, 5e-3, 50);
    }
    tc.seed = seed;
    const TrainResult res = fine_tune_generative(model, latents, tc);
    save_checkpoint(out, model.to_checkpoint());
    write_manifest(manifest_path(out), "diff-finetune", cfg, seed, {in, ae_path, ckpt}, {out});
    std::cout << "fine-tuned diffusion on " << latents.size() << " latents: " << res.log.size()
              << " epochs, best monitor noise-MSE " << res.best_val << "\n";
    return 0;
}

int cmd_encode(const KeyValueConfig& cfg) {
    const std::string in = cfg.require_string("in");
    const std::string ae_path = cfg.require_string("ae");
    const std::string out = cfg.require_string("out");
    const Autoencoder<float> ae =
        Autoencoder<float>::from_checkpoint(load_checkpoint_required(ae_path));
    const auto records = load_uatv(in);
    const auto sequences = records_to_sequences(records, ae.cfg.T, cfg.get_bool("normalize", true),
                                                cfg.get_u64("anchor_index", SIZE_MAX));
    LatentSet set;
    set.dim = ae.cfg.latent;
    for (const FeatureSeq& h : sequences) set.latents.push_back(ae.encode(h));
    set.metadata = {{"source", in}, {"count", set.latents.size()}};
    save_latents(out, set);
    write_manifest(manifest_path(out), "encode", cfg, cfg.get_u64("seed", 0), {in, ae_path},
                   {out});
    std::cout << "encoded " << set.latents.size() << " latents to " << out << "\n";
    return 0;
}

int cmd_decode(const KeyValueConfig& cfg) {
    const std::string in = cfg.require_string("in");
    const std::string ae_path = cfg.require_string("ae");
    const std::string out = cfg.require_string("out");
    const Autoencoder<float> ae =
        Autoencoder<float>::from_checkpoint(load_checkpoint_required(ae_path));
    const LatentSet set = load_latents(in);
    require(set.dim == ae.cfg.latent, "decode: latent dimension mismatch");
    const double snapshot_rate = cfg.get_double("snapshot_rate", 20.0);
    const double delay_rate = cfg.get_double("delay_rate", 12000.0);
    std::vector<TvirRecord> records;
    for (size_t i = 0; i < set.latents.size(); ++i) {
        const FeatureSeq h = ae.decode(set.latents[i]);
        Tvir tvir = defeaturize_tvir(h, 1.0 / snapshot_rate, 1.0 / delay_rate);
        if (cfg.has("rate")) tvir = resample_time(tvir, cfg.get_double("rate", snapshot_rate));
        TvirRecord rec;
        rec.tvir = std::move(tvir);
        rec.metadata = {{"decoded_from", in}, {"latent_index", i}};
        records.push_back(std::move(rec));
    }
    save_uatv(out, records);
    write_manifest(manifest_path(out), "decode", cfg, cfg.get_u64("seed", 0), {in, ae_path},
                   {out});
    std::cout << "decoded " << records.size() << " TVIRs to " << out << "\n";
    return 0;
}

int cmd_generate(const KeyValueConfig& cfg) {
    const std::string in = cfg.require_string("in");
    const std::string ae_path = cfg.require_string("ae");
    const std::string diff_path = cfg.require_string("diff");
    const std::string out = cfg.require_string("out");
    const uint64_t seed = require_seed(cfg);
    const size_t num_samples = cfg.get_u64("num_samples", 1);

    const Autoencoder<float> ae =
        Autoencoder<float>::from_checkpoint(load_checkpoint_required(ae_path));
    const DiffusionModel<float> diff =
        DiffusionModel<float>::from_checkpoint(load_checkpoint_required(diff_path));
    const auto records = load_uatv(in);
    const auto conditions = records_to_sequences(records, ae.cfg.T, cfg.get_bool("normalize", true),
                                                 cfg.get_u64("anchor_index", SIZE_MAX));

    std::vector<TvirRecord> outputs;
    Rng root(seed, 0x9e4);
    for (size_t c = 0; c < conditions.size(); ++c) {
        const std::vector<double> z_c = ae.encode(conditions[c]);
        Rng stream = root.stream(c);
        const auto samples = generate_batch(
            diff, std::vector<std::vector<double>>(num_samples, z_c), stream);
        for (size_t s = 0; s < samples.size(); ++s) {
            const FeatureSeq h = ae.decode(samples[s]);
            Tvir tvir = defeaturize_tvir(h, 1.0 / cfg.get_double("snapshot_rate", 20.0),
                                         1.0 / cfg.get_double("delay_rate", 12000.0));
            if (cfg.has("rate")) tvir = resample_time(tvir, cfg.get_double("rate", 20.0));
            TvirRecord rec;
            rec.tvir = std::move(tvir);
            rec.metadata = {{"condition_index", c}, {"sample_index", s}, {"seed", seed}};
            outputs.push_back(std::move(rec));
        }
    }
    save_uatv(out, outputs);
    write_manifest(manifest_path(out), "generate", cfg, seed, {in, ae_path, diff_path}, {out});
    std::cout << "generated " << outputs.size() << " TVIRs to " << out << "\n";
    return 0;
}

int cmd_metrics(const KeyValueConfig& cfg) {
    const std::string in = cfg.require_string("in");
    const std::string prefix = cfg.require_string("out");
    const auto records = load_uatv(in);
    require(!records.empty(), "metrics: empty input");

    std::vector<Characteristics> rows;
    std::vector<double> amps, phases;
    for (const TvirRecord& rec : records) {
        rows.push_back(characteristics(rec.tvir));
        const SignificantTaps st = significant_taps(rec.tvir);
        for (const auto& [a, p] : st.taps) {
            amps.push_back(a);
            phases.push_back(p);
        }
    }
    std::vector<std::string> outputs;
    const std::string char_csv = prefix + "_characteristics.csv";
    write_characteristics_csv(char_csv, rows);
    outputs.push_back(char_csv);

    const char* names[8] = {"mean_delay",     "delay_spread",   "rms_delay_spread",
                            "doppler_spread", "coherence_time", "coherence_bandwidth",
                            "num_significant_taps", "total_gain"};
    for (int k = 0; k < 8; ++k) {
        std::vector<double> samples;
        for (const Characteristics& c : rows) {
            const double v[8] = {c.mean_delay,     c.delay_spread_10db, c.rms_delay_spread,
                                 c.doppler_spread_10db, c.coherence_time, c.coherence_bandwidth,
                                 c.num_significant_taps, c.total_gain};
            samples.push_back(v[k]);
        }
        const std::string path = prefix + "_cdf_" + names[k] + ".csv";
        write_cdf_csv(path, EmpiricalCdf(samples));
        outputs.push_back(path);
    }
    if (!amps.empty()) {
        const size_t bins = cfg.get_u64("hist_bins", 50);
        double amax = 0.0;
        for (double a : amps) amax = std::max(amax, a);
        const std::string amp_csv = prefix + "_hist_amplitude.csv";
        write_histogram_csv(amp_csv, histogram(amps, bins, 0.0, amax * (1.0 + 1e-9)), 0.0,
                            amax * (1.0 + 1e-9));
        outputs.push_back(amp_csv);
        const std::string ph_csv = prefix + "_hist_phase.csv";
        write_histogram_csv(ph_csv, histogram(phases, bins, -kPi, kPi + 1e-9), -kPi, kPi + 1e-9);
        outputs.push_back(ph_csv);
    }
    write_manifest(manifest_path(prefix), "metrics", cfg, cfg.get_u64("seed", 0), {in}, outputs);
    std::cout << "metrics for " << rows.size() << " TVIRs written with prefix " << prefix << "\n";
    return 0;
}

int cmd_ber(const KeyValueConfig& cfg) {
    const std::string in = cfg.require_string("in");
    const std::string out = cfg.require_string("out");
    const std::string schemes_path = cfg.get_string("schemes", "presets/schemes.txt");
    const uint64_t seed = require_seed(cfg);
    const auto schemes = load_schemes(schemes_path);
    const std::string which = cfg.get_string("scheme", "nof1");
    const auto snr_grid = parse_grid(cfg.get_string("snr", "0,5,10,15,20"));

    std::vector<Tvir> tvirs;
    for (const TvirRecord& rec : load_uatv(in)) tvirs.push_back(rec.tvir);

    std::vector<BerTableRow> table;
    Rng root(seed, 0xbe4);
    if (which == "all") {
        for (const OfdmScheme& s : schemes) {
            Rng stream = root.stream(std::hash<std::string>{}(s.id));
            const auto rows = evaluate_ber(tvirs, s, snr_grid, stream);
            table.insert(table.end(), rows.begin(), rows.end());
        }
    } else {
        const OfdmScheme s = find_scheme(schemes, which);
        const auto rows = evaluate_ber(tvirs, s, snr_grid, root);
        table.insert(table.end(), rows.begin(), rows.end());
    }
    write_ber_csv(out, table);
    write_manifest(manifest_path(out), "ber", cfg, seed, {in, schemes_path}, {out});
    std::cout << "BER table (" << table.size() << " rows) written to " << out << "\n";
    return 0;
}

int cmd_replay(const KeyValueConfig& cfg) {
    const std::string in = cfg.require_string("in");
    const std::string out = cfg.require_string("out");
    const std::string mode = cfg.get_string("mode", "direct");
    const auto records = load_uatv(in);
    std::vector<TvirRecord> outputs;
    if (mode == "direct") {
        for (size_t i = 0; i < records.size(); ++i) {
            TvirRecord rec;
            rec.tvir = direct_replay(records[i].tvir);
            rec.metadata = records[i].metadata;
            rec.metadata["baseline"] = "direct-replay";
            outputs.push_back(std::move(rec));
        }
    } else if (mode == "stochastic") {
        const uint64_t seed = require_seed(cfg);
        const size_t target_T = cfg.get_u64("target_T", 20);
        Rng root(seed, 0x4e9);
        StochasticReplayConfig src;
        src.min_window_s = cfg.get_double("min_window_s", 8.0);
        for (size_t i = 0; i < records.size(); ++i) {
            Rng stream = root.stream(i);
            const auto segments = stochastic_replay(records[i].tvir, target_T, stream, src);
            for (size_t s = 0; s < segments.size(); ++s) {
                TvirRecord rec;
                rec.tvir = segments[s];
                rec.metadata = {{"baseline", "stochastic-replay"},
                                {"source_record", i},
                                {"segment", s}};
                outputs.push_back(std::move(rec));
            }
        }
    } else {
        throw InvalidInput("replay: mode must be direct or stochastic");
    }
    save_uatv(out, outputs);
    write_manifest(manifest_path(out), "replay", cfg, cfg.get_u64("seed", 0), {in}, {out});
    std::cout << "replayed " << outputs.size() << " TVIRs (" << mode << ") to " << out << "\n";
    return 0;
}

int cmd_nlms(const KeyValueConfig& cfg) {
    const std::string in = cfg.require_string("in");
    const std::string out = cfg.require_string("out");
    const uint64_t seed = require_seed(cfg);
    const int order = static_cast<int>(cfg.get_u64("order", 13));
    const size_t repeats = cfg.get_u64("repeats", 5);
    const double mu = cfg.get_double("mu", 0.5);
    const double snr_db = cfg.get_double("snr", std::numeric_limits<double>::infinity());

    const auto seq = msequence(order);
    const auto records = load_uatv(in);
    require(!records.empty(), "nlms: empty input");
    std::vector<TvirRecord> outputs;
    Rng root(seed, 0x1245);
    double nmse_acc = 0.0;
    for (size_t i = 0; i < records.size(); ++i) {
        const Tvir& truth = records[i].tvir;
        const double fs = 1.0 / truth.delay_step;
        size_t probe_len = seq.size() * repeats;
        const size_t max_len = static_cast<size_t>(truth.duration() * fs);
        probe_len = std::min(probe_len, max_len);
        require(probe_len >= seq.size(), "nlms: TVIR shorter than one probe period");
        std::vector<cdouble> probe(probe_len);
        for (size_t n = 0; n < probe_len; ++n) probe[n] = {seq[n % seq.size()], 0.0};
        Rng stream = root.stream(i);
        const auto received = apply_channel(probe, truth, snr_db, stream);
        const size_t stride = std::max<size_t>(
            1, static_cast<size_t>(std::llround(truth.time_step * fs)));
        NlmsResult res = nlms_estimate(probe, received, truth.D, mu,
                                       cfg.get_double("eps_reg", 1e-8), stride, fs);

        // NMSE of the final tracked snapshot against the closest truth snapshot.
        const size_t t_est = res.estimate.T - 1;
        const size_t t_true = std::min<size_t>(
            truth.T - 1, static_cast<size_t>(static_cast<double>((t_est + 1) * stride) / fs /
                                             truth.time_step));
        double num = 0.0, den = 0.0;
        for (size_t j = 0; j < truth.D; ++j) {
            num += std::norm(res.estimate.at(t_est, j) - truth.at(t_true, j));
            den += std::norm(truth.at(t_true, j));
        }
        nmse_acc += power_to_db(num / den);

        TvirRecord rec;
        rec.tvir = std::move(res.estimate);
        rec.metadata = {{"source_record", i},
                        {"order", order},
                        {"mu", mu},
                        {"snr_db", std::isfinite(snr_db) ? nlohmann::json(snr_db)
                                                         : nlohmann::json("inf")},
                        {"zero_energy_updates", res.zero_energy_updates}};
        outputs.push_back(std::move(rec));
    }
    save_uatv(out, outputs);
    write_manifest(manifest_path(out), "nlms", cfg, seed, {in}, {out});
    std::cout << "NLMS estimates for " << outputs.size()
              << " records, mean final-snapshot NMSE "
              << nmse_acc / static_cast<double>(outputs.size()) << " dB, written to " << out
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uasim: surrogate modeling toolkit for time-varying underwater acoustic channels"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::string config_path;
    std::vector<std::string> overrides;
    bool deterministic = false;

    const std::vector<std::string> commands = {"sim-gen", "ae-train", "ae-finetune",
                                               "diff-train", "diff-finetune", "encode",
                                               "decode", "generate", "metrics", "ber",
                                               "replay", "nlms"};
    std::map<std::string, CLI::App*> subs;
    for (const std::string& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "key = value config file");
        sub->add_option("--set", overrides, "override config keys (key=value)")
            ->take_all();
        sub->add_flag("--deterministic", deterministic,
                      "force single-threaded bit-reproducible execution (the default mode)");
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        std::cerr << e.what() << "\n";
        return kExitUnknownCommand;
    }

    try {
        const KeyValueConfig cfg = resolve_config(config_path, overrides);
        for (const std::string& name : commands) {
            if (!subs[name]->parsed()) continue;
            if (name == "sim-gen") return cmd_sim_gen(cfg);
            if (name == "ae-train") return cmd_ae_train(cfg, false);
            if (name == "ae-finetune") return cmd_ae_train(cfg, true);
            if (name == "diff-train") return cmd_diff_train(cfg);
            if (name == "diff-finetune") return cmd_diff_finetune(cfg);
            if (name == "encode") return cmd_encode(cfg);
            if (name == "decode") return cmd_decode(cfg);
            if (name == "generate") return cmd_generate(cfg);
            if (name == "metrics") return cmd_metrics(cfg);
            if (name == "ber") return cmd_ber(cfg);
            if (name == "replay") return cmd_replay(cfg);
            if (name == "nlms") return cmd_nlms(cfg);
        }
        std::cerr << "no command selected\n";
        return kExitUnknownCommand;
    } catch (const MissingCheckpoint& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingCheckpoint;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidConfig;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
