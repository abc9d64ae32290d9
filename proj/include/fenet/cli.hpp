#pragma once

// Command-line front end: ingest, synth, train, eval, predict, energy,
// gridsearch. Progress goes to stderr; data goes to files or stdout. Failures
// print one line "error: <category>: <message>" and exit with a per-category
// code (io=3, parse=4, config=5, numeric=6; usage errors=2).

#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fenet/common.hpp"
#include "fenet/energy.hpp"
#include "fenet/model.hpp"
#include "fenet/rr_signal.hpp"
#include "fenet/train_eval.hpp"

namespace fenet::cli {

inline int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::io: return 3;
        case ErrorKind::parse: return 4;
        case ErrorKind::format: return 4;
        case ErrorKind::config: return 5;
        case ErrorKind::invalid_input: return 5;
        case ErrorKind::numeric: return 6;
    }
    return 1;
}

// accepts plain decimals and simple fractions like "1/3"
inline double parse_ratio(const std::string& s, const std::string& what) {
    auto slash = s.find('/');
    if (slash == std::string::npos) return parse_double(s, what);
    double num = parse_double(s.substr(0, slash), what);
    double den = parse_double(s.substr(slash + 1), what);
    require(den != 0.0, ErrorKind::config, what + ": zero denominator");
    return num / den;
}

struct CliState {
    // ingest
    std::vector<std::string> ingest_pulse_files;
    std::string ingest_out;
    std::string ingest_labels;

    // synth
    std::size_t synth_patients = 1;
    std::size_t synth_minutes = 480;
    double synth_apnea_rate = 0.4;
    std::string synth_band = "0.2:0.3333333333333333";
    std::uint64_t synth_seed = 1;
    std::string synth_out;

    // train
    std::string train_data, train_config, train_out, train_history;
    std::uint64_t train_seed = 0;
    int train_m = -1;
    CLI::Option* train_seed_opt = nullptr;
    CLI::Option* train_m_opt = nullptr;

    // eval
    std::string eval_checkpoint, eval_data, eval_out;

    // predict
    std::string predict_checkpoint, predict_data, predict_out;

    // energy
    double energy_hours = 8.0;
    std::string energy_dc = "1,1/3,1/5,1/7,1/9";
    std::string energy_profiles, energy_out;
    bool energy_csv = false;

    // gridsearch
    std::string grid_data, grid_config, grid_out_best, grid_results;
    std::size_t grid_workers = 1;
    std::uint64_t grid_seed = 0;
    CLI::Option* grid_seed_opt = nullptr;
};

namespace actions {

inline std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
    if (path.empty()) return std::cout;
    file.open(path);
    require(file.good(), ErrorKind::io, "cannot write: " + path);
    return file;
}

inline void cmd_ingest(const CliState& st) {
    require(!st.ingest_pulse_files.empty(), ErrorKind::config, "ingest: no pulse files given");
    std::vector<int> labels;
    if (!st.ingest_labels.empty()) {
        require(st.ingest_pulse_files.size() == 1, ErrorKind::config,
                "ingest: --labels requires a single pulse file");
        std::ifstream in(st.ingest_labels);
        require(in.good(), ErrorKind::io, "cannot open label file: " + st.ingest_labels);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string_view s = trim(line);
            if (s.empty() || s.front() == '#') continue;
            std::int64_t v = parse_int(s, st.ingest_labels + ":" + std::to_string(lineno));
            require(v == 0 || v == 1, ErrorKind::format,
                    st.ingest_labels + ":" + std::to_string(lineno) + ": label must be 0 or 1");
            labels.push_back(static_cast<int>(v));
        }
    }

    std::vector<EpochMatrix> patients;
    for (const std::string& path : st.ingest_pulse_files) {
        PulseTrain pt = parse_pulse_file(path);
        IngestStats stats;
        std::size_t n_seconds = static_cast<std::size_t>(std::floor(pt.timestamps.back()));
        require(n_seconds >= kEpochSeconds, ErrorKind::format,
                path + ": record shorter than one minute");
        auto rr = rr_from_pulses(pt, n_seconds, &stats);
        patients.push_back(epochize(rr, labels, pt.patient_id));
        if (stats.clamped_low + stats.clamped_high > 0) {
            std::cerr << "warning: " << pt.patient_id << ": clamped " << stats.clamped_low
                      << " short and " << stats.clamped_high << " long RR values";
            auto de = stats.dropout_epochs();
            if (!de.empty()) {
                std::cerr << "; sensor-dropout epochs (gap > 10 s):";
                for (std::size_t e : de) std::cerr << ' ' << e;
            }
            std::cerr << "\n";
        }
    }
    write_epoch_file_multi(patients, st.ingest_out);
    std::cerr << "wrote " << patients.size() << " patient(s) to " << st.ingest_out << "\n";
}

inline void cmd_synth(const CliState& st) {
    auto parts = split(st.synth_band, ':');
    require(parts.size() == 2, ErrorKind::config, "synth: --band must be lo:hi in Hz");
    BreathBand band{parse_double(parts[0], "--band"), parse_double(parts[1], "--band")};
    std::vector<EpochMatrix> patients;
    for (std::size_t k = 0; k < st.synth_patients; ++k) {
        SynthParams p;
        p.seed = splitmix64(st.synth_seed ^ splitmix64(k + 1));
        p.n_minutes = st.synth_minutes;
        p.apnea_rate = st.synth_apnea_rate;
        p.band = band;
        p.patient_id = "synth-" + std::to_string(st.synth_seed) + "-" + std::to_string(k);
        patients.push_back(synth_patient(p));
    }
    write_epoch_file_multi(patients, st.synth_out);
    std::cerr << "wrote " << patients.size() << " synthetic patient(s), " << st.synth_minutes
              << " minutes each, to " << st.synth_out << "\n";
}

inline RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return parse_config_file(path);
}

inline void write_history(const std::string& path, const TrainResult& tr, const std::string& grid_point) {
    if (path.empty()) return;
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot write history: " + path);
    out << metrics_csv_header() << "\n";
    for (const EpochRecord& er : tr.history) {
        if (!er.val) continue;
        out << metrics_csv_line(er.epoch, grid_point, "val", *er.val, er.wall_seconds) << "\n";
    }
}

inline void cmd_train(const CliState& st) {
    RunConfig rc = load_run_config(st.train_config);
    if (st.train_seed_opt != nullptr && st.train_seed_opt->count() > 0) {
        rc.train.seed = st.train_seed;
        rc.split.seed = st.train_seed;
    }
    if (st.train_m_opt != nullptr && st.train_m_opt->count() > 0) rc.train.model.m = st.train_m;
    rc.train.validate();

    auto patients = parse_epoch_file_multi(st.train_data);
    std::size_t dropped = 0;
    NestedDataset all = NestedDataset::from_patients(patients, rc.train.model.m, &dropped);
    if (dropped > 0) std::cerr << "note: dropped " << dropped << " windows with unlabeled epochs\n";
    const std::string grid_point = grid_point_str(rc.train.lambda_center, rc.train.model.l, rc.train.model.w);

    if (rc.split.kind == SplitPlan::Kind::epoch_random) {
        EpochSplit es = make_epoch_split(all.size(), rc.split);
        NestedDataset train_set = all.subset(es.train);
        NestedDataset val_set = all.subset(es.val);
        NestedDataset test_set = all.subset(es.test);
        std::cerr << "training on " << train_set.size() << " windows, validating on " << val_set.size()
                  << ", testing on " << test_set.size() << "\n";
        TrainResult tr = train(train_set, &val_set, rc.train);
        save_checkpoint(tr.model, st.train_out);
        write_history(st.train_history, tr, grid_point);
        MetricsReport val = evaluate(tr.model, val_set);
        MetricsReport test = evaluate(tr.model, test_set);
        double wall = tr.history.empty() ? 0.0 : tr.history.back().wall_seconds;
        std::cout << metrics_csv_header() << "\n";
        std::cout << metrics_csv_line(0, grid_point, "val", val, wall) << "\n";
        std::cout << metrics_csv_line(0, grid_point, "test", test, wall) << "\n";
        return;
    }

    // patient-level cold start: k-fold cross validation, no validation set
    // (fixed epoch count), pooled confusion counts across folds
    std::cerr << "cold-start protocol: no validation set, training runs max_epochs="
              << rc.train.max_epochs << " per fold\n";
    std::vector<std::string> ids;
    for (const EpochMatrix& em : patients) ids.push_back(em.patient_id);
    auto folds = make_patient_folds(ids, rc.split);
    MetricsReport pooled;
    std::ofstream hist;
    if (!st.train_history.empty()) {
        hist.open(st.train_history);
        require(hist.good(), ErrorKind::io, "cannot write history: " + st.train_history);
        hist << metrics_csv_header() << "\n";
    }
    std::cout << metrics_csv_header() << "\n";
    bool first_fold_saved = false;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < all.items.size(); ++i) {
            bool in_test = std::find(folds[f].begin(), folds[f].end(), all.items[i].patient_id) !=
                           folds[f].end();
            (in_test ? test_idx : train_idx).push_back(i);
        }
        NestedDataset train_set = all.subset(train_idx);
        NestedDataset test_set = all.subset(test_idx);
        TrainConfig fold_cfg = rc.train;
        fold_cfg.seed = splitmix64(rc.train.seed ^ splitmix64(f + 1));
        TrainResult tr = train(train_set, nullptr, fold_cfg);
        MetricsReport fold = evaluate(tr.model, test_set);
        pooled.tp += fold.tp;
        pooled.tn += fold.tn;
        pooled.fp += fold.fp;
        pooled.fn += fold.fn;
        double wall = tr.history.empty() ? 0.0 : tr.history.back().wall_seconds;
        std::cout << metrics_csv_line(f, grid_point, "fold" + std::to_string(f), fold, wall) << "\n";
        if (hist.is_open())
            hist << metrics_csv_line(f, grid_point, "fold" + std::to_string(f), fold, wall) << "\n";
        if (!first_fold_saved) {
            save_checkpoint(tr.model, st.train_out);
            first_fold_saved = true;
        }
    }
    pooled.finalize();
    std::cout << metrics_csv_line(folds.size(), grid_point, "pooled", pooled, 0.0) << "\n";
}

inline void cmd_eval(const CliState& st) {
    FENet model = load_checkpoint(st.eval_checkpoint);
    auto patients = parse_epoch_file_multi(st.eval_data);
    NestedDataset data = NestedDataset::from_patients(patients, model.cfg.m);
    require(!data.items.empty(), ErrorKind::format, st.eval_data + ": no usable labeled windows");
    MetricsReport r = evaluate(model, data);
    if (r.tp + r.fn == 0) std::cerr << "warning: no positive labels in ground truth; Rec undefined\n";
    std::ofstream file;
    std::ostream& out = open_or_stdout(st.eval_out, file);
    const std::string gp = grid_point_str(-1.0, model.cfg.l, model.cfg.w);
    out << metrics_csv_header() << "\n";
    out << metrics_csv_line(0, gp, "test", r, 0.0) << "\n";
}

inline void cmd_predict(const CliState& st) {
    FENet model = load_checkpoint(st.predict_checkpoint);
    auto patients = parse_epoch_file_multi(st.predict_data);
    std::ofstream file;
    std::ostream& out = open_or_stdout(st.predict_out, file);
    out << "patient_id,epoch_index,label\n";
    const int m = model.cfg.m;
    for (const EpochMatrix& em : patients) {
        DiscontinuousSequence ds = downsample(em, m);
        NestedLabelSeq pred = predict_sequence(model, ds);
        for (std::size_t k = 0; k < pred.entries.size(); ++k) {
            const std::size_t center = ds.kept_indices[k];
            for (std::size_t h = 0; h < pred.entries[k].size(); ++h) {
                std::size_t idx = center - static_cast<std::size_t>(m) + h;
                out << em.patient_id << ',' << idx << ',' << pred.entries[k][h] << "\n";
            }
        }
    }
}

inline void cmd_energy(const CliState& st) {
    ProfileSet ps;
    if (st.energy_profiles.empty()) {
        ps.devices = builtin_devices();
        ps.sensors = builtin_sensors();
    } else {
        ps = parse_profile_file(st.energy_profiles);
        if (ps.devices.empty()) ps.devices = builtin_devices();
        if (ps.sensors.empty()) ps.sensors = builtin_sensors();
    }
    std::vector<double> dcs;
    for (auto f : split(st.energy_dc, ','))
        dcs.push_back(parse_ratio(std::string(trim(f)), "--dc"));
    auto rows = feasibility_report(ps.devices, ps.sensors, st.energy_hours, dcs);
    std::ofstream file;
    std::ostream& out = open_or_stdout(st.energy_out, file);
    out << (st.energy_csv ? feasibility_csv(rows) : feasibility_table(rows));
}

inline void cmd_gridsearch(const CliState& st) {
    RunConfig rc = load_run_config(st.grid_config);
    if (st.grid_seed_opt != nullptr && st.grid_seed_opt->count() > 0) {
        rc.train.seed = st.grid_seed;
        rc.split.seed = st.grid_seed;
    }
    if (st.grid_workers > 0) rc.workers = st.grid_workers;
    require(rc.split.kind == SplitPlan::Kind::epoch_random, ErrorKind::config,
            "gridsearch: requires an epoch_random split (validation set needed)");

    auto patients = parse_epoch_file_multi(st.grid_data);
    NestedDataset all = NestedDataset::from_patients(patients, rc.train.model.m);
    EpochSplit es = make_epoch_split(all.size(), rc.split);
    NestedDataset train_set = all.subset(es.train);
    NestedDataset val_set = all.subset(es.val);
    std::cerr << "grid search over " << rc.grids.lambda2.size() * rc.grids.l.size() * rc.grids.w.size()
              << " points, " << rc.workers << " worker(s)\n";
    GridSearchResult gs = grid_search(train_set, val_set, rc.train, rc.grids, rc.workers);

    std::ofstream file;
    std::ostream& out = open_or_stdout(st.grid_results, file);
    out << metrics_csv_header() << "\n";
    for (const GridRunResult& r : gs.runs)
        out << metrics_csv_line(r.run_id, grid_point_str(r.lambda2, r.l, r.w), "val", r.val,
                                r.wall_seconds)
            << "\n";
    const GridRunResult& b = gs.runs[gs.best_index];
    std::cerr << "best: run " << b.run_id << " " << grid_point_str(b.lambda2, b.l, b.w)
              << " Rec=" << metric_str(b.val.rec) << " Acc=" << metric_str(b.val.acc) << "\n";
    if (!st.grid_out_best.empty()) save_checkpoint(gs.best.model, st.grid_out_best);
}

}  // namespace actions

inline std::unique_ptr<CLI::App> make_app(std::shared_ptr<CliState> st) {
    auto app = std::make_unique<CLI::App>("FENet: energy-efficient sleep apnea detection on RR-interval epochs");
    app->require_subcommand(1);

    CLI::App* ingest = app->add_subcommand("ingest", "Convert pulse-timestamp files to an epoch file");
    ingest->add_option("pulse_files", st->ingest_pulse_files, "pulse timestamp files (one per patient)")
        ->required()
        ->expected(-1);
    ingest->add_option("--out", st->ingest_out, "output epoch file")->required();
    ingest->add_option("--labels", st->ingest_labels, "per-minute 0/1 label file (single patient only)");
    ingest->callback([st] { actions::cmd_ingest(*st); });

    CLI::App* synth = app->add_subcommand("synth", "Generate labeled synthetic patients");
    synth->add_option("--patients", st->synth_patients, "number of patients");
    synth->add_option("--minutes", st->synth_minutes, "minutes per patient");
    synth->add_option("--apnea-rate", st->synth_apnea_rate, "fraction of apnea minutes in [0,1]");
    synth->add_option("--band", st->synth_band, "breathing band lo:hi in Hz, within [1/6, 1/3]");
    synth->add_option("--seed", st->synth_seed, "random seed");
    synth->add_option("--out", st->synth_out, "output epoch file")->required();
    synth->callback([st] { actions::cmd_synth(*st); });

    CLI::App* train = app->add_subcommand("train", "Train a model on a labeled epoch file");
    train->add_option("--data", st->train_data, "labeled epoch file")->required();
    train->add_option("--config", st->train_config, "key=value training config file");
    train->add_option("--out", st->train_out, "output checkpoint file")->required();
    train->add_option("--history", st->train_history, "per-epoch metrics file");
    st->train_seed_opt = train->add_option("--seed", st->train_seed, "overrides the config seed");
    st->train_m_opt = train->add_option("--m", st->train_m, "overrides the config skip halfwidth m");
    train->callback([st] { actions::cmd_train(*st); });

    CLI::App* eval = app->add_subcommand("eval", "Evaluate a checkpoint on a labeled epoch file");
    eval->add_option("--checkpoint", st->eval_checkpoint, "model checkpoint")->required();
    eval->add_option("--data", st->eval_data, "labeled epoch file")->required();
    eval->add_option("--out", st->eval_out, "metrics file (default stdout)");
    eval->callback([st] { actions::cmd_eval(*st); });

    CLI::App* predict = app->add_subcommand("predict", "Emit the unfolded label timeline for an epoch file");
    predict->add_option("--checkpoint", st->predict_checkpoint, "model checkpoint")->required();
    predict->add_option("--data", st->predict_data, "epoch file")->required();
    predict->add_option("--out", st->predict_out, "output file (default stdout)");
    predict->callback([st] { actions::cmd_predict(*st); });

    CLI::App* energy = app->add_subcommand("energy", "Duty-cycle energy feasibility report");
    energy->add_option("--hours", st->energy_hours, "monitoring duration T in hours");
    energy->add_option("--dc", st->energy_dc, "comma-separated duty cycles (fractions like 1/3 allowed)");
    energy->add_option("--profiles", st->energy_profiles, "device/sensor profile file (default built-ins)");
    energy->add_option("--out", st->energy_out, "output file (default stdout)");
    energy->add_flag("--csv", st->energy_csv, "emit comma-separated values instead of a table");
    energy->callback([st] { actions::cmd_energy(*st); });

    CLI::App* grid = app->add_subcommand("gridsearch", "Grid search over lambda2, l and w");
    grid->add_option("--data", st->grid_data, "labeled epoch file")->required();
    grid->add_option("--config", st->grid_config, "key=value training config file");
    grid->add_option("--out-best", st->grid_out_best, "checkpoint file for the selected model");
    grid->add_option("--results", st->grid_results, "results table file (default stdout)");
    grid->add_option("--workers", st->grid_workers, "parallel training workers");
    st->grid_seed_opt = grid->add_option("--seed", st->grid_seed, "overrides the config seed");
    grid->callback([st] { actions::cmd_gridsearch(*st); });

    return app;
}

inline int run(int argc, const char* const* argv) {
    auto st = std::make_shared<CliState>();
    auto app = make_app(st);
    try {
        app->parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app->exit(e);
        return rc == 0 ? 0 : 2;  // normalize usage failures; --help stays 0
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    }
    return 0;
}

inline int run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.push_back("fenet");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) argv.push_back(s.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace fenet::cli
