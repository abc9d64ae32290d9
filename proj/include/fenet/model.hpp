#pragma once

// The FENet architecture: multi-frequency residual dilated branches G_d over a
// 60-second RR epoch, channel concatenation into H_i, a frequency feature
// extractor, a 3-layer convolutional classifier trunk, and 2m+1 parallel
// fully-connected heads emitting per-epoch apnea probabilities.

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include "fenet/common.hpp"
#include "fenet/ops.hpp"
#include "fenet/rr_signal.hpp"
#include "fenet/tensor.hpp"

namespace fenet {

// d2..d4 are fixed; only the bottom dilation d1 varies across branches.
inline constexpr std::array<int, 3> kUpperDilations{2, 4, 8};

// freq(k_j) = freq_s / d_j
inline double filter_frequency(int d, double freq_s) {
    require(d >= 1, ErrorKind::invalid_input, "filter_frequency: dilation must be >= 1");
    require(freq_s > 0.0, ErrorKind::invalid_input, "filter_frequency: sampling frequency must be > 0");
    return freq_s / static_cast<double>(d);
}

struct BranchConfig {
    int d1 = 3;
    std::array<int, 3> upper = kUpperDilations;
    int w = 3;
    double freq_s = 1.0;
};

struct FENetConfig {
    int m = 1;                           // heads = 2m+1, duty cycle 1/(2m+1)
    std::vector<int> d1{3, 4, 5, 6};     // one branch per bottom dilation
    int w = 3;                           // branch/extractor kernel width
    int l = 1;                           // extractor output channels
    std::array<std::size_t, 3> trunk_c{8, 8, 4};
    double dropout = 0.5;
    double freq_s = 1.0;                 // one RR value per second

    std::size_t branches() const { return d1.size(); }
    std::size_t heads() const { return 2 * static_cast<std::size_t>(m) + 1; }
    std::size_t flat_features() const { return trunk_c[2] * kEpochSeconds; }

    void validate() const {
        require(m >= 0, ErrorKind::config, "config: m must be >= 0");
        require(!d1.empty(), ErrorKind::config, "config: need at least one branch dilation");
        for (int d : d1)
            require(d >= 3, ErrorKind::config,
                    "config: d1=" + std::to_string(d) + " below the 20 breaths/min bound (d1 >= 3)");
        require(w == 3 || w == 5 || w == 7, ErrorKind::config, "config: kernel width must be 3, 5 or 7");
        require(l >= 1 && static_cast<std::size_t>(l) <= d1.size(), ErrorKind::config,
                "config: extractor kernels l=" + std::to_string(l) + " must satisfy 1 <= l <= |D|=" +
                    std::to_string(d1.size()));
        require(dropout >= 0.0 && dropout < 1.0, ErrorKind::config, "config: dropout must be in [0,1)");
        require(freq_s > 0.0, ErrorKind::config, "config: freq_s must be > 0");
        for (std::size_t c : trunk_c)
            require(c >= 1, ErrorKind::config, "config: trunk channel counts must be >= 1");
    }

    BranchConfig branch(std::size_t i) const { return BranchConfig{d1.at(i), kUpperDilations, w, freq_s}; }
};

// Per-head output for one sample: probability pair and hard label per offset
// i' in {i-m .. i+m}; ties resolve to label 0 (P0 >= P1 -> 0).
struct ModelOutput {
    std::vector<std::array<double, 2>> head_probs;
    std::vector<int> head_labels;
};

struct ConvParam {
    ConvKernel k;
    std::vector<double> dw, db;

    ConvParam() = default;
    explicit ConvParam(ConvKernel kk) : k(std::move(kk)), dw(k.w.size(), 0.0), db(k.b.size(), 0.0) {}
};

struct ParamRef {
    std::string name;
    std::vector<double>* value = nullptr;
    std::vector<double>* grad = nullptr;  // null for running statistics
    bool trainable = false;
};

struct ForwardTrace {
    bool training = false;
    Tensor x;  // (n,1,60)
    struct Branch {
        std::array<BnCache, 3> bn_cache;
        std::array<Tensor, 3> bn_out;    // relu inputs
        std::array<Tensor, 3> relu_out;  // inputs to convs 2..4
    };
    std::vector<Branch> branches;
    Tensor H;  // (n,|D|,60), input to the extractor conv
    BnCache ex_bn_cache;
    Tensor ex_bn_out;
    Tensor Hp;  // (n,l,60)
    std::array<Tensor, 3> trunk_in;
    std::array<BnCache, 3> trunk_bn_cache;
    std::array<Tensor, 3> trunk_bn_out;
    Tensor flat;                     // (n, trunk_c[2]*60, 1)
    std::vector<Tensor> head_mask;   // dropout masks
    std::vector<Tensor> head_fc_in;  // dropout outputs
    std::vector<Tensor> logits;      // (n,2,1) per head
    std::vector<Tensor> probs;       // softmax of logits
};

class FENet {
public:
    FENetConfig cfg;

    FENet() = default;

    explicit FENet(FENetConfig config) : cfg(std::move(config)) {
        cfg.validate();
        const std::size_t nb = cfg.branches();
        const std::size_t width = static_cast<std::size_t>(cfg.w);
        bottom_.reserve(nb);
        branch_bn_.reserve(nb);
        for (std::size_t i = 0; i < nb; ++i) {
            bottom_.emplace_back(ConvKernel(1, 1, width));
            branch_bn_.push_back({BatchNorm(1), BatchNorm(1), BatchNorm(1)});
        }
        upper_ = ConvParam(ConvKernel(1, 1, width));  // k2 = k3 = k4, one storage location
        extractor_ = ConvParam(ConvKernel(static_cast<std::size_t>(cfg.l), nb, width));
        extractor_bn_ = BatchNorm(static_cast<std::size_t>(cfg.l));
        std::size_t in_c = static_cast<std::size_t>(cfg.l);
        for (std::size_t j = 0; j < 3; ++j) {
            trunk_[j] = ConvParam(ConvKernel(cfg.trunk_c[j], in_c, 3));
            trunk_bn_[j] = BatchNorm(cfg.trunk_c[j]);
            in_c = cfg.trunk_c[j];
        }
        heads_.reserve(cfg.heads());
        for (std::size_t h = 0; h < cfg.heads(); ++h) heads_.emplace_back(cfg.flat_features(), 2);
    }

    // Uniform +-1/sqrt(fan_in) weights, zero biases, BN at identity.
    void init_params(std::uint64_t seed) {
        Rng rng(seed);
        auto init_conv = [&rng](ConvParam& cp) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(cp.k.in_c * cp.k.width));
            for (double& w : cp.k.w) w = rng.uniform(-bound, bound);
            std::fill(cp.k.b.begin(), cp.k.b.end(), 0.0);
        };
        for (ConvParam& cp : bottom_) init_conv(cp);
        init_conv(upper_);
        init_conv(extractor_);
        for (ConvParam& cp : trunk_) init_conv(cp);
        for (FcLayer& fc : heads_) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fc.in));
            for (double& w : fc.w) w = rng.uniform(-bound, bound);
            std::fill(fc.b.begin(), fc.b.end(), 0.0);
        }
    }

    // --- forward -----------------------------------------------------------

    // One residual multi-frequency branch:
    // G_d(x) = x + (((x *_{d1} k1 -> BN -> ReLU) *_2 k -> BN -> ReLU) *_4 k -> BN -> ReLU) *_8 k
    Tensor branch_forward(const Tensor& x, std::size_t branch, bool training,
                          ForwardTrace::Branch* tr = nullptr) {
        require(branch < bottom_.size(), ErrorKind::invalid_input, "branch_forward: branch index");
        require(x.c == 1 && x.len == kEpochSeconds, ErrorKind::invalid_input,
                "branch_forward: expected (n,1,60) input, got " + x.shape_str());
        ForwardTrace::Branch local;
        ForwardTrace::Branch& t = tr != nullptr ? *tr : local;

        Tensor cur = conv1d_dilated(x, bottom_[branch].k, cfg.d1[branch]);
        for (std::size_t j = 0; j < 3; ++j) {
            t.bn_out[j] = batch_norm_forward(cur, branch_bn_[branch][j], training, t.bn_cache[j]);
            t.relu_out[j] = relu(t.bn_out[j]);
            cur = conv1d_dilated(t.relu_out[j], upper_.k, kUpperDilations[j]);
        }
        return residual_add(x, cur);
    }

    // H_i: one branch per row, shape (n, |D|, 60)
    Tensor multi_branch(const Tensor& x, bool training, ForwardTrace* trace = nullptr) {
        std::vector<Tensor> rows;
        rows.reserve(bottom_.size());
        if (trace != nullptr) trace->branches.resize(bottom_.size());
        for (std::size_t i = 0; i < bottom_.size(); ++i)
            rows.push_back(
                branch_forward(x, i, training, trace != nullptr ? &trace->branches[i] : nullptr));
        return concat_channels(rows);
    }

    // H_i' = ReLU(BN(conv(H_i))), shape (n, l, 60)
    Tensor extract_features(const Tensor& H, bool training, ForwardTrace* trace = nullptr) {
        require(H.c == bottom_.size(), ErrorKind::invalid_input,
                "extract_features: expected " + std::to_string(bottom_.size()) + " channels");
        Tensor c = conv1d_dilated(H, extractor_.k, 1);
        BnCache local_cache;
        BnCache& cache = trace != nullptr ? trace->ex_bn_cache : local_cache;
        Tensor b = batch_norm_forward(c, extractor_bn_, training, cache);
        if (trace != nullptr) trace->ex_bn_out = b;
        return relu(b);
    }

    // Full forward over a batch of epochs x: (n,1,60).
    ForwardTrace forward(const Tensor& x, bool training, Rng* dropout_rng = nullptr) {
        require(x.n >= 1 && x.c == 1 && x.len == kEpochSeconds, ErrorKind::invalid_input,
                "forward: expected (n,1,60) input, got " + x.shape_str());
        require(!training || dropout_rng != nullptr, ErrorKind::invalid_input,
                "forward: training mode needs a dropout RNG");
        ForwardTrace tr;
        tr.training = training;
        tr.x = x;
        tr.H = multi_branch(x, training, &tr);
        tr.Hp = extract_features(tr.H, training, &tr);

        Tensor cur = tr.Hp;
        for (std::size_t j = 0; j < 3; ++j) {
            tr.trunk_in[j] = cur;
            Tensor c = conv1d_dilated(cur, trunk_[j].k, 1);
            tr.trunk_bn_out[j] = batch_norm_forward(c, trunk_bn_[j], training, tr.trunk_bn_cache[j]);
            cur = relu(tr.trunk_bn_out[j]);
        }
        tr.flat = flatten(std::move(cur));

        const std::size_t nh = cfg.heads();
        tr.head_mask.resize(nh);
        tr.head_fc_in.resize(nh);
        tr.logits.resize(nh);
        tr.probs.resize(nh);
        Rng unused(0);
        Rng& rng = dropout_rng != nullptr ? *dropout_rng : unused;
        for (std::size_t h = 0; h < nh; ++h) {
            tr.head_fc_in[h] = dropout_forward(tr.flat, cfg.dropout, training, rng, tr.head_mask[h]);
            tr.logits[h] = fully_connected(tr.head_fc_in[h], heads_[h]);
            tr.probs[h] = softmax_rows(tr.logits[h]);
        }
        return tr;
    }

    // Backpropagates per-head logit gradients; accumulates parameter gradients
    // and returns the gradient w.r.t. the input batch.
    Tensor backward(const ForwardTrace& tr, const std::vector<Tensor>& dlogits) {
        require(dlogits.size() == cfg.heads(), ErrorKind::invalid_input,
                "backward: expected " + std::to_string(cfg.heads()) + " logit gradients");

        Tensor dflat = Tensor::zeros_like(tr.flat);
        for (std::size_t h = 0; h < dlogits.size(); ++h) {
            Tensor dfc = fully_connected_backward(dlogits[h], tr.head_fc_in[h], heads_[h]);
            Tensor ddrop = dropout_backward(dfc, tr.head_mask[h]);
            for (std::size_t i = 0; i < dflat.v.size(); ++i) dflat.v[i] += ddrop.v[i];
        }

        // unflatten to (n, trunk_c[2], 60); the buffer layout matches
        Tensor d = dflat;
        d.c = cfg.trunk_c[2];
        d.len = kEpochSeconds;

        for (std::size_t jj = 3; jj-- > 0;) {
            Tensor drelu = relu_backward(d, tr.trunk_bn_out[jj]);
            Tensor dbn = batch_norm_backward(drelu, trunk_bn_[jj], tr.trunk_bn_cache[jj]);
            ConvGrads g = conv1d_dilated_backward(dbn, tr.trunk_in[jj], trunk_[jj].k, 1);
            accumulate(trunk_[jj], g);
            d = std::move(g.input_grad);
        }

        // extractor: d is dHp
        {
            Tensor drelu = relu_backward(d, tr.ex_bn_out);
            Tensor dbn = batch_norm_backward(drelu, extractor_bn_, tr.ex_bn_cache);
            ConvGrads g = conv1d_dilated_backward(dbn, tr.H, extractor_.k, 1);
            accumulate(extractor_, g);
            d = std::move(g.input_grad);
        }

        std::vector<Tensor> dH = split_channels(d, std::vector<std::size_t>(bottom_.size(), 1));
        Tensor dx = Tensor::zeros_like(tr.x);
        for (std::size_t i = 0; i < bottom_.size(); ++i) {
            const ForwardTrace::Branch& bt = tr.branches[i];
            Tensor db = dH[i];  // gradient at G_d output
            for (std::size_t k = 0; k < dx.v.size(); ++k) dx.v[k] += db.v[k];  // residual path

            for (std::size_t jj = 3; jj-- > 0;) {
                ConvGrads g = conv1d_dilated_backward(db, bt.relu_out[jj], upper_.k, kUpperDilations[jj]);
                accumulate(upper_, g);
                Tensor drelu = relu_backward(g.input_grad, bt.bn_out[jj]);
                db = batch_norm_backward(drelu, branch_bn_[i][jj], bt.bn_cache[jj]);
            }
            ConvGrads g = conv1d_dilated_backward(db, tr.x, bottom_[i].k, cfg.d1[i]);
            accumulate(bottom_[i], g);
            for (std::size_t k = 0; k < dx.v.size(); ++k) dx.v[k] += g.input_grad.v[k];
        }
        return dx;
    }

    void zero_grad() {
        auto zero = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
        for (ConvParam& cp : bottom_) {
            zero(cp.dw);
            zero(cp.db);
        }
        zero(upper_.dw);
        zero(upper_.db);
        zero(extractor_.dw);
        zero(extractor_.db);
        for (ConvParam& cp : trunk_) {
            zero(cp.dw);
            zero(cp.db);
        }
        for (auto& bns : branch_bn_)
            for (BatchNorm& bn : bns) {
                zero(bn.dgamma);
                zero(bn.dbeta);
            }
        zero(extractor_bn_.dgamma);
        zero(extractor_bn_.dbeta);
        for (BatchNorm& bn : trunk_bn_) {
            zero(bn.dgamma);
            zero(bn.dbeta);
        }
        for (FcLayer& fc : heads_) {
            zero(fc.dw);
            zero(fc.db);
        }
    }

    // --- inference ---------------------------------------------------------

    // Per-sample probabilities and hard labels for a batch of epochs.
    std::vector<ModelOutput> classify(const Tensor& x) {
        ForwardTrace tr = forward(x, false);
        std::vector<ModelOutput> out(x.n);
        for (std::size_t b = 0; b < x.n; ++b) {
            out[b].head_probs.resize(cfg.heads());
            out[b].head_labels.resize(cfg.heads());
            for (std::size_t h = 0; h < cfg.heads(); ++h) {
                double p0 = tr.probs[h].at(b, 0, 0);
                double p1 = tr.probs[h].at(b, 1, 0);
                out[b].head_probs[h] = {p0, p1};
                out[b].head_labels[h] = p0 >= p1 ? 0 : 1;
            }
        }
        return out;
    }

    std::vector<int> predict(const std::vector<double>& epoch) {
        require(epoch.size() == kEpochSeconds, ErrorKind::invalid_input, "predict: epoch must have 60 values");
        Tensor x(1, 1, kEpochSeconds);
        x.v = epoch;
        return classify(x)[0].head_labels;
    }

    // --- parameter access ----------------------------------------------------

    // Canonical parameter order; checkpoints, Adam and the gradient checks all
    // iterate this list.
    std::vector<ParamRef> param_refs() {
        std::vector<ParamRef> refs;
        auto add = [&refs](const std::string& name, std::vector<double>& v, std::vector<double>* g,
                           bool trainable) {
            refs.push_back(ParamRef{name, &v, g, trainable});
        };
        auto add_bn = [&](const std::string& prefix, BatchNorm& bn) {
            add(prefix + ".gamma", bn.gamma, &bn.dgamma, true);
            add(prefix + ".beta", bn.beta, &bn.dbeta, true);
            add(prefix + ".run_mean", bn.run_mean, nullptr, false);
            add(prefix + ".run_var", bn.run_var, nullptr, false);
        };
        for (std::size_t i = 0; i < bottom_.size(); ++i) {
            const std::string p = "branch" + std::to_string(i);
            add(p + ".k1.w", bottom_[i].k.w, &bottom_[i].dw, true);
            add(p + ".k1.b", bottom_[i].k.b, &bottom_[i].db, true);
        }
        add("shared.k.w", upper_.k.w, &upper_.dw, true);
        add("shared.k.b", upper_.k.b, &upper_.db, true);
        for (std::size_t i = 0; i < branch_bn_.size(); ++i)
            for (std::size_t j = 0; j < 3; ++j)
                add_bn("branch" + std::to_string(i) + ".bn" + std::to_string(j + 1), branch_bn_[i][j]);
        add("extractor.k.w", extractor_.k.w, &extractor_.dw, true);
        add("extractor.k.b", extractor_.k.b, &extractor_.db, true);
        add_bn("extractor.bn", extractor_bn_);
        for (std::size_t j = 0; j < 3; ++j) {
            const std::string p = "trunk" + std::to_string(j + 1);
            add(p + ".k.w", trunk_[j].k.w, &trunk_[j].dw, true);
            add(p + ".k.b", trunk_[j].k.b, &trunk_[j].db, true);
            add_bn(p + ".bn", trunk_bn_[j]);
        }
        for (std::size_t h = 0; h < heads_.size(); ++h) {
            add("head" + std::to_string(h) + ".w", heads_[h].w, &heads_[h].dw, true);
            add("head" + std::to_string(h) + ".b", heads_[h].b, &heads_[h].db, true);
        }
        return refs;
    }

    const ConvKernel& shared_kernel() const { return upper_.k; }
    ConvKernel& shared_kernel_mut() { return upper_.k; }
    const ConvKernel& bottom_kernel(std::size_t i) const { return bottom_.at(i).k; }
    ConvKernel& bottom_kernel_mut(std::size_t i) { return bottom_.at(i).k; }

private:
    static void accumulate(ConvParam& cp, const ConvGrads& g) {
        for (std::size_t i = 0; i < cp.dw.size(); ++i) cp.dw[i] += g.kernel_grad[i];
        for (std::size_t i = 0; i < cp.db.size(); ++i) cp.db[i] += g.bias_grad[i];
    }

    std::vector<ConvParam> bottom_;
    ConvParam upper_;
    std::vector<std::array<BatchNorm, 3>> branch_bn_;
    ConvParam extractor_;
    BatchNorm extractor_bn_;
    std::array<ConvParam, 3> trunk_;
    std::array<BatchNorm, 3> trunk_bn_;
    std::vector<FcLayer> heads_;
};

// Predictions over all kept epochs of a discontinuous record.
inline NestedLabelSeq predict_sequence(FENet& model, const DiscontinuousSequence& ds) {
    require(ds.skip_halfwidth == model.cfg.m, ErrorKind::config,
            "predict_sequence: sequence m=" + std::to_string(ds.skip_halfwidth) +
                " does not match model m=" + std::to_string(model.cfg.m));
    NestedLabelSeq out;
    out.patient_id = ds.patient_id;
    out.skip_halfwidth = ds.skip_halfwidth;
    if (ds.epochs.empty()) return out;
    Tensor x(ds.epochs.size(), 1, kEpochSeconds);
    for (std::size_t i = 0; i < ds.epochs.size(); ++i)
        for (std::size_t j = 0; j < kEpochSeconds; ++j) x.at(i, 0, j) = ds.epochs[i][j];
    auto outs = model.classify(x);
    out.entries.reserve(outs.size());
    for (const ModelOutput& mo : outs) out.entries.push_back(mo.head_labels);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format: versioned text, header "fenet-ckpt v1", config lines,
// then named parameter blocks in canonical order at 17 significant digits.
// ---------------------------------------------------------------------------

inline void save_checkpoint(FENet& model, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot write checkpoint: " + path);
    const FENetConfig& c = model.cfg;
    out << "fenet-ckpt v1\n";
    out << "m " << c.m << "\n";
    out << "w " << c.w << "\n";
    out << "l " << c.l << "\n";
    out << "dropout " << detail::fmt17(c.dropout) << "\n";
    out << "freq_s " << detail::fmt17(c.freq_s) << "\n";
    out << "d1";
    for (int d : c.d1) out << ' ' << d;
    out << "\n";
    out << "trunk";
    for (std::size_t t : c.trunk_c) out << ' ' << t;
    out << "\n";
    auto refs = model.param_refs();
    out << "tensors " << refs.size() << "\n";
    for (const ParamRef& r : refs) {
        out << r.name << ' ' << r.value->size() << "\n";
        for (std::size_t i = 0; i < r.value->size(); ++i) {
            if (i != 0) out << ' ';
            out << detail::fmt17((*r.value)[i]);
        }
        out << "\n";
    }
    require(out.good(), ErrorKind::io, "write failed: " + path);
}

inline FENet load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open checkpoint: " + path);
    std::string line;
    auto next_line = [&](const char* what) -> std::string {
        while (std::getline(in, line)) {
            if (!trim(line).empty()) return std::string(trim(line));
        }
        fail(ErrorKind::format, path + ": truncated checkpoint, expected " + std::string(what));
    };

    require(next_line("header") == "fenet-ckpt v1", ErrorKind::format,
            path + ": unsupported checkpoint version (expected 'fenet-ckpt v1')");

    FENetConfig cfg;
    auto expect_kv = [&](const char* key) {
        std::string l = next_line(key);
        auto fields = split(l, ' ');
        require(!fields.empty() && fields[0] == key, ErrorKind::format,
                path + ": expected '" + key + "' line, got '" + l + "'");
        return std::vector<std::string>(fields.begin() + 1, fields.end());
    };
    cfg.m = static_cast<int>(parse_int(expect_kv("m").at(0), "m"));
    cfg.w = static_cast<int>(parse_int(expect_kv("w").at(0), "w"));
    cfg.l = static_cast<int>(parse_int(expect_kv("l").at(0), "l"));
    cfg.dropout = parse_double(expect_kv("dropout").at(0), "dropout");
    cfg.freq_s = parse_double(expect_kv("freq_s").at(0), "freq_s");
    cfg.d1.clear();
    for (auto f : expect_kv("d1")) cfg.d1.push_back(static_cast<int>(parse_int(f, "d1")));
    auto tc = expect_kv("trunk");
    require(tc.size() == 3, ErrorKind::format, path + ": trunk line must list 3 channel counts");
    for (std::size_t j = 0; j < 3; ++j)
        cfg.trunk_c[j] = static_cast<std::size_t>(parse_int(tc[j], "trunk"));

    FENet model(cfg);
    auto refs = model.param_refs();
    auto count_fields = expect_kv("tensors");
    std::size_t n_tensors = static_cast<std::size_t>(parse_int(count_fields.at(0), "tensors"));
    require(n_tensors == refs.size(), ErrorKind::format,
            path + ": checkpoint lists " + std::to_string(n_tensors) + " tensors, model has " +
                std::to_string(refs.size()));
    for (ParamRef& r : refs) {
        std::string hdr = next_line("tensor header");
        auto fields = split(hdr, ' ');
        require(fields.size() == 2 && fields[0] == r.name, ErrorKind::format,
                path + ": expected tensor '" + r.name + "', got '" + hdr + "'");
        std::size_t count = static_cast<std::size_t>(parse_int(fields[1], "tensor size"));
        require(count == r.value->size(), ErrorKind::format,
                path + ": tensor '" + r.name + "' has " + std::to_string(count) + " values, expected " +
                    std::to_string(r.value->size()));
        std::string vals = next_line("tensor values");
        auto vf = split(vals, ' ');
        require(vf.size() == count, ErrorKind::format,
                path + ": tensor '" + r.name + "' value line has " + std::to_string(vf.size()) +
                    " entries, expected " + std::to_string(count));
        for (std::size_t i = 0; i < count; ++i) (*r.value)[i] = parse_double(vf[i], r.name);
    }
    return model;
}

}  // namespace fenet
