#pragma once

// RR-interval signal handling: pulse timestamps -> per-second RR series ->
// one-minute epoch matrices, duty-cycle downsampling, nested label tuples,
// a synthetic patient generator, and the pulse/epoch file formats.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fenet/common.hpp"

namespace fenet {

inline constexpr std::size_t kEpochSeconds = 60;
inline constexpr int kUnlabeled = -1;  // '?' in epoch files

// physiological sanity bounds applied on ingestion
inline constexpr double kRrMinSeconds = 0.2;
inline constexpr double kRrMaxSeconds = 10.0;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct PulseTrain {
    std::string patient_id;
    std::vector<double> timestamps;  // seconds from recording start, strictly increasing

    void validate() const {
        require(timestamps.size() >= 2, ErrorKind::invalid_input,
                "PulseTrain '" + patient_id + "': needs at least 2 pulses");
        require(timestamps.front() >= 0.0, ErrorKind::invalid_input,
                "PulseTrain '" + patient_id + "': negative timestamp");
        for (std::size_t i = 1; i < timestamps.size(); ++i)
            require(timestamps[i] > timestamps[i - 1], ErrorKind::invalid_input,
                    "PulseTrain '" + patient_id + "': timestamps not strictly increasing at index " +
                        std::to_string(i));
    }
};

struct EpochMatrix {
    std::string patient_id;
    std::vector<std::vector<double>> epochs;  // each exactly kEpochSeconds RR values
    std::vector<int> labels;                  // empty, or one of {0,1,kUnlabeled} per epoch

    std::size_t size() const { return epochs.size(); }
    bool labeled() const { return !labels.empty(); }

    void validate() const {
        for (std::size_t i = 0; i < epochs.size(); ++i) {
            require(epochs[i].size() == kEpochSeconds, ErrorKind::format,
                    "EpochMatrix '" + patient_id + "': epoch " + std::to_string(i) + " has " +
                        std::to_string(epochs[i].size()) + " values, expected 60");
            for (double v : epochs[i])
                require(std::isfinite(v) && v > 0.0 && v <= kRrMaxSeconds, ErrorKind::format,
                        "EpochMatrix '" + patient_id + "': RR value out of (0, 10] s in epoch " +
                            std::to_string(i));
        }
        require(labels.empty() || labels.size() == epochs.size(), ErrorKind::format,
                "EpochMatrix '" + patient_id + "': label count does not match epoch count");
        for (int a : labels)
            require(a == 0 || a == 1 || a == kUnlabeled, ErrorKind::format,
                    "EpochMatrix '" + patient_id + "': label outside {0,1,?}");
    }
};

struct DiscontinuousSequence {
    std::string patient_id;
    int skip_halfwidth = 0;                // m; window width is 2m+1
    std::vector<std::size_t> kept_indices;  // 0-based window centers
    std::vector<std::vector<double>> epochs;
};

struct NestedLabelSeq {
    std::string patient_id;
    int skip_halfwidth = 0;
    std::vector<std::vector<int>> entries;  // each of width 2m+1

    void validate() const {
        const std::size_t width = 2 * static_cast<std::size_t>(skip_halfwidth) + 1;
        for (const auto& tup : entries) {
            require(tup.size() == width, ErrorKind::format,
                    "NestedLabelSeq: tuple width " + std::to_string(tup.size()) + " does not match m=" +
                        std::to_string(skip_halfwidth));
            for (int a : tup)
                require(a == 0 || a == 1 || a == kUnlabeled, ErrorKind::format,
                        "NestedLabelSeq: label outside {0,1,?}");
        }
    }
};

// Clamp/dropout bookkeeping from ingestion.
struct IngestStats {
    std::size_t clamped_low = 0;
    std::size_t clamped_high = 0;
    std::vector<std::size_t> dropout_seconds;  // 1-based tau with a raw gap > 10 s

    // epochs (0-based) containing at least one dropout second
    std::vector<std::size_t> dropout_epochs() const {
        std::vector<std::size_t> out;
        for (std::size_t tau : dropout_seconds) {
            std::size_t e = (tau - 1) / kEpochSeconds;
            if (out.empty() || out.back() != e) out.push_back(e);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------

// Per-second RR series: for integer tau in 1..n_seconds, I(tau) = t(R_i) - t(R_{i-1})
// with t(R_{i-1}) <= tau < t(R_i). tau before the first interval backfills with
// the first available interval; raw gaps are clamped to [0.2, 10] s.
inline std::vector<double> rr_from_pulses(const PulseTrain& pulses, std::size_t n_seconds,
                                          IngestStats* stats = nullptr) {
    pulses.validate();
    const auto& ts = pulses.timestamps;
    require(n_seconds >= 1, ErrorKind::invalid_input, "rr_from_pulses: n_seconds must be >= 1");
    require(static_cast<double>(n_seconds) <= std::floor(ts.back()), ErrorKind::invalid_input,
            "rr_from_pulses: n_seconds=" + std::to_string(n_seconds) + " exceeds floor(last pulse)=" +
                std::to_string(static_cast<long long>(std::floor(ts.back()))));

    std::vector<double> out(n_seconds);
    std::size_t hi = 1;  // candidate upper pulse index; advances with tau
    for (std::size_t tau = 1; tau <= n_seconds; ++tau) {
        const double t = static_cast<double>(tau);
        while (hi + 1 < ts.size() && ts[hi] <= t) ++hi;
        // now ts[hi-1] <= t < ts[hi] when an enclosing interval exists;
        // tau < ts[0] backfills with the first interval, tau >= ts.back() uses the last
        double raw = ts[hi] - ts[hi - 1];
        if (raw > kRrMaxSeconds) {
            if (stats != nullptr) {
                stats->clamped_high++;
                stats->dropout_seconds.push_back(tau);
            }
            raw = kRrMaxSeconds;
        } else if (raw < kRrMinSeconds) {
            if (stats != nullptr) stats->clamped_low++;
            raw = kRrMinSeconds;
        }
        out[tau - 1] = raw;
    }
    return out;
}

// Chunks a per-second series into 60-value epochs; the trailing partial minute
// is discarded. Labels, when given, are per minute and aligned to epoch index.
inline EpochMatrix epochize(const std::vector<double>& rr_series, const std::vector<int>& labels = {},
                            const std::string& patient_id = "") {
    require(rr_series.size() >= kEpochSeconds, ErrorKind::invalid_input,
            "epochize: series of " + std::to_string(rr_series.size()) + " s is shorter than one minute");
    const std::size_t n_epochs = rr_series.size() / kEpochSeconds;
    EpochMatrix em;
    em.patient_id = patient_id;
    em.epochs.reserve(n_epochs);
    for (std::size_t i = 0; i < n_epochs; ++i) {
        auto first = rr_series.begin() + static_cast<std::ptrdiff_t>(i * kEpochSeconds);
        em.epochs.emplace_back(first, first + kEpochSeconds);
    }
    if (!labels.empty()) {
        require(labels.size() >= n_epochs, ErrorKind::format,
                "epochize: " + std::to_string(labels.size()) + " labels for " + std::to_string(n_epochs) +
                    " epochs");
        em.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_epochs));
    }
    em.validate();
    return em;
}

// 0-based window centers for width 2m+1: m, 3m+1, 5m+2, ... (1-based m+1, 3m+2, ...).
// Consecutive windows [c-m, c+m] tile a prefix of the record with no overlap.
inline std::vector<std::size_t> window_centers(std::size_t n_epochs, int m) {
    std::vector<std::size_t> centers;
    const std::size_t width = 2 * static_cast<std::size_t>(m) + 1;
    for (std::size_t c = static_cast<std::size_t>(m); c + static_cast<std::size_t>(m) < n_epochs; c += width)
        centers.push_back(c);
    return centers;
}

inline DiscontinuousSequence downsample(const EpochMatrix& full, int m) {
    require(m >= 0, ErrorKind::invalid_input, "downsample: m must be >= 0");
    const std::size_t width = 2 * static_cast<std::size_t>(m) + 1;
    require(full.size() >= width, ErrorKind::invalid_input,
            "downsample: record of " + std::to_string(full.size()) + " epochs is shorter than window " +
                std::to_string(width));
    DiscontinuousSequence ds;
    ds.patient_id = full.patient_id;
    ds.skip_halfwidth = m;
    ds.kept_indices = window_centers(full.size(), m);
    ds.epochs.reserve(ds.kept_indices.size());
    for (std::size_t c : ds.kept_indices) ds.epochs.push_back(full.epochs[c]);
    return ds;
}

// Nested tuples y_c = (a_{c-m}, ..., a_{c+m}) for each window center; the
// trailing labels not covered by a complete window are dropped.
inline NestedLabelSeq nest_labels(const std::vector<int>& flat, int m, const std::string& patient_id = "") {
    require(m >= 0, ErrorKind::invalid_input, "nest_labels: m must be >= 0");
    NestedLabelSeq ns;
    ns.patient_id = patient_id;
    ns.skip_halfwidth = m;
    for (std::size_t c : window_centers(flat.size(), m)) {
        std::vector<int> tup(flat.begin() + static_cast<std::ptrdiff_t>(c - static_cast<std::size_t>(m)),
                             flat.begin() + static_cast<std::ptrdiff_t>(c + static_cast<std::size_t>(m) + 1));
        ns.entries.push_back(std::move(tup));
    }
    ns.validate();
    return ns;
}

inline std::vector<int> unfold_labels(const NestedLabelSeq& nested) {
    nested.validate();
    std::vector<int> flat;
    flat.reserve(nested.entries.size() * (2 * static_cast<std::size_t>(nested.skip_halfwidth) + 1));
    for (const auto& tup : nested.entries) flat.insert(flat.end(), tup.begin(), tup.end());
    return flat;
}

// ---------------------------------------------------------------------------
// Synthetic patients
// ---------------------------------------------------------------------------

struct BreathBand {
    double lo_hz = 0.2;        // 12 breaths/min
    double hi_hz = 1.0 / 3.0;  // 20 breaths/min
};

struct SynthParams {
    std::uint64_t seed = 1;
    std::size_t n_minutes = 480;
    double apnea_rate = 0.4;
    BreathBand band;
    std::string patient_id;  // defaults to "synth-<seed>"
};

// RR = baseline + respiratory sinusoid; apnea minutes lengthen the baseline
// and flatten the modulation. Event onset/offset ramps over +-30 s so the
// sensed minute carries evidence about its neighbours. Apnea minutes are
// placed as multi-minute runs whose total count is round(rate * n_minutes).
inline EpochMatrix synth_patient(const SynthParams& p) {
    require(p.apnea_rate >= 0.0 && p.apnea_rate <= 1.0, ErrorKind::invalid_input,
            "synth_patient: apnea_rate must be in [0,1]");
    require(p.band.lo_hz >= 1.0 / 6.0 - 1e-12 && p.band.hi_hz <= 1.0 / 3.0 + 1e-12 &&
                p.band.lo_hz <= p.band.hi_hz,
            ErrorKind::invalid_input, "synth_patient: breath band must lie within [1/6, 1/3] Hz");
    require(p.n_minutes >= 1, ErrorKind::invalid_input, "synth_patient: n_minutes must be >= 1");

    Rng rng(p.seed);
    const std::size_t n = p.n_minutes;

    // per-minute labels: apnea runs of 4..12 minutes, exact total count
    std::vector<int> labels(n, 0);
    const std::size_t target = static_cast<std::size_t>(std::llround(p.apnea_rate * static_cast<double>(n)));
    if (target >= n) {
        std::fill(labels.begin(), labels.end(), 1);
    } else if (target > 0) {
        std::vector<std::size_t> runs;
        std::size_t placed = 0;
        while (placed < target) {
            std::size_t run = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform_int(4, 12)),
                                                    target - placed);
            runs.push_back(run);
            placed += run;
        }
        // split the normal minutes into len(runs)+1 gaps proportional to random weights
        const std::size_t normal_total = n - target;
        std::vector<double> wts(runs.size() + 1);
        double wsum = 0.0;
        for (double& w : wts) {
            w = 0.05 + rng.uniform();
            wsum += w;
        }
        std::vector<std::size_t> gaps(wts.size());
        std::size_t assigned = 0;
        for (std::size_t i = 0; i < wts.size(); ++i) {
            gaps[i] = static_cast<std::size_t>(std::floor(static_cast<double>(normal_total) * wts[i] / wsum));
            assigned += gaps[i];
        }
        for (std::size_t i = 0; assigned < normal_total; i = (i + 1) % gaps.size(), ++assigned) gaps[i]++;

        std::size_t pos = 0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            pos += gaps[i];
            for (std::size_t j = 0; j < runs[i]; ++j) labels[pos + j] = 1;
            pos += runs[i];
        }
    }

    // per-second signal
    const double baseline = rng.uniform(0.88, 0.98);
    const double breath_hz = rng.uniform(p.band.lo_hz, p.band.hi_hz);
    const double phase = rng.uniform(0.0, 6.283185307179586);
    const double resp_amp = rng.uniform(0.04, 0.06);
    const double apnea_shift = 0.22;  // RR lengthening during events
    const double noise_sd = 0.008;

    const std::size_t n_sec = n * kEpochSeconds;
    std::vector<double> rr(n_sec);
    const int ramp = 30;  // seconds of onset/offset smoothing
    for (std::size_t s = 0; s < n_sec; ++s) {
        double env = 0.0;
        for (int j = -ramp; j <= ramp; ++j) {
            long long idx = static_cast<long long>(s) + j;
            idx = std::clamp<long long>(idx, 0, static_cast<long long>(n_sec) - 1);
            env += labels[static_cast<std::size_t>(idx) / kEpochSeconds];
        }
        env /= static_cast<double>(2 * ramp + 1);
        const double mod = resp_amp * (1.0 - 0.85 * env);
        double v = baseline + apnea_shift * env +
                   mod * std::sin(6.283185307179586 * breath_hz * static_cast<double>(s) + phase) +
                   noise_sd * rng.gaussian();
        rr[s] = std::clamp(v, kRrMinSeconds, kRrMaxSeconds);
    }

    std::string id = p.patient_id.empty() ? "synth-" + std::to_string(p.seed) : p.patient_id;
    return epochize(rr, labels, id);
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

// Pulse file: one ascending decimal timestamp (seconds) per line, '#' comments.
inline PulseTrain parse_pulse_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open pulse file: " + path);
    PulseTrain pt;
    pt.patient_id = std::filesystem::path(path).stem().string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        double t = parse_double(s, path + ":" + std::to_string(lineno));
        require(t >= 0.0, ErrorKind::format, path + ":" + std::to_string(lineno) + ": negative timestamp");
        require(pt.timestamps.empty() || t > pt.timestamps.back(), ErrorKind::format,
                path + ":" + std::to_string(lineno) + ": timestamps must be strictly increasing");
        pt.timestamps.push_back(t);
    }
    pt.validate();
    return pt;
}

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_epoch_record(std::ostream& out, const EpochMatrix& em) {
    for (std::size_t i = 0; i < em.size(); ++i) {
        out << em.patient_id << '\t' << i << '\t';
        if (em.labeled() && em.labels[i] != kUnlabeled)
            out << em.labels[i];
        else
            out << '?';
        out << '\t';
        for (std::size_t j = 0; j < kEpochSeconds; ++j) {
            if (j != 0) out << ',';
            out << fmt17(em.epochs[i][j]);
        }
        out << '\n';
    }
}

}  // namespace detail

// Epoch file: one line per epoch,
//   patient_id <tab> epoch_index <tab> label(0|1|?) <tab> 60 comma-separated RR seconds
inline void write_epoch_file(const EpochMatrix& em, const std::string& path) {
    em.validate();
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot write epoch file: " + path);
    detail::write_epoch_record(out, em);
    require(out.good(), ErrorKind::io, "write failed: " + path);
}

inline void write_epoch_file_multi(const std::vector<EpochMatrix>& patients, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot write epoch file: " + path);
    for (const EpochMatrix& em : patients) {
        em.validate();
        detail::write_epoch_record(out, em);
    }
    require(out.good(), ErrorKind::io, "write failed: " + path);
}

// Parses a (possibly multi-patient) epoch file; patients keep file order.
inline std::vector<EpochMatrix> parse_epoch_file_multi(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open epoch file: " + path);
    std::vector<EpochMatrix> patients;
    std::map<std::string, std::size_t> index_of;
    std::string line;
    std::size_t lineno = 0;
    bool any_label = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        const std::string at = path + ":" + std::to_string(lineno);
        auto fields = split(s, '\t');
        require(fields.size() == 4, ErrorKind::parse, at + ": expected 4 tab-separated fields, got " +
                                                          std::to_string(fields.size()));

        std::string pid(trim(fields[0]));
        require(!pid.empty(), ErrorKind::format, at + ": empty patient id");
        auto [it, inserted] = index_of.try_emplace(pid, patients.size());
        if (inserted) {
            patients.emplace_back();
            patients.back().patient_id = pid;
        }
        EpochMatrix& em = patients[it->second];

        std::int64_t idx = parse_int(fields[1], at + " epoch_index");
        require(idx == static_cast<std::int64_t>(em.size()), ErrorKind::format,
                at + ": epoch_index " + std::to_string(idx) + " out of order for patient '" + pid +
                    "' (expected " + std::to_string(em.size()) + ")");

        std::string_view lab = trim(fields[2]);
        int label;
        if (lab == "?")
            label = kUnlabeled;
        else if (lab == "0")
            label = 0;
        else if (lab == "1")
            label = 1;
        else
            fail(ErrorKind::format, at + ": label must be 0, 1 or ?, got '" + std::string(lab) + "'");
        if (label != kUnlabeled) any_label = true;

        auto vals = split(fields[3], ',');
        require(vals.size() == kEpochSeconds, ErrorKind::format,
                at + ": expected 60 RR values, got " + std::to_string(vals.size()));
        std::vector<double> epoch(kEpochSeconds);
        for (std::size_t j = 0; j < kEpochSeconds; ++j) {
            double v = parse_double(vals[j], at + " value " + std::to_string(j + 1));
            require(v > 0.0 && v <= kRrMaxSeconds, ErrorKind::format,
                    at + ": RR value " + detail::fmt17(v) + " outside (0, 10] s");
            epoch[j] = v;
        }
        em.epochs.push_back(std::move(epoch));
        em.labels.push_back(label);
    }
    require(!patients.empty(), ErrorKind::format, path + ": no epoch records");
    for (EpochMatrix& em : patients) {
        if (!any_label) em.labels.clear();  // fully unlabeled file
        em.validate();
    }
    return patients;
}

// Single-patient convenience; errors out when the file mixes patients.
inline EpochMatrix parse_epoch_file(const std::string& path) {
    auto patients = parse_epoch_file_multi(path);
    require(patients.size() == 1, ErrorKind::format,
            path + ": expected a single patient, found " + std::to_string(patients.size()));
    return std::move(patients.front());
}

}  // namespace fenet
