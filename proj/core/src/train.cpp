#include "mlcl/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mlcl {

namespace {

bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

std::vector<Vec> encoder_grads_to_flat(const EncoderGrads& g) {
    std::vector<Vec> out;
    for (const Linear& layer : g.backbone) {
        out.push_back(layer.weight.values);
        out.push_back(layer.bias);
    }
    out.push_back(g.proj1.weight.values);
    out.push_back(g.proj2.weight.values);
    return out;
}

DenseMatrix labels_to_matrix(const std::vector<LabelVector>& labels) {
    const std::size_t n = labels.size();
    const std::size_t num_labels = labels[0].size();
    DenseMatrix m(n, num_labels);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < num_labels; ++j) m.at(i, j) = labels[i].has(j) ? 1.0 : 0.0;
    return m;
}

}  // namespace

std::vector<TensorRef> encoder_tensor_refs(EncoderParams& params, const std::string& prefix) {
    std::vector<TensorRef> refs;
    for (std::size_t l = 0; l < params.backbone.size(); ++l) {
        const std::string base = prefix + ".backbone." + std::to_string(l);
        refs.push_back({base + ".weight", params.backbone[l].weight.values.data(),
                        params.backbone[l].weight.values.size(), true});
        refs.push_back({base + ".bias", params.backbone[l].bias.data(),
                        params.backbone[l].bias.size(), false});
    }
    refs.push_back({prefix + ".proj1.weight", params.proj1.weight.values.data(),
                    params.proj1.weight.values.size(), true});
    refs.push_back({prefix + ".proj2.weight", params.proj2.weight.values.data(),
                    params.proj2.weight.values.size(), true});
    return refs;
}

AdamW::AdamW(double weight_decay, double beta1, double beta2, double eps)
    : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(const std::vector<TensorRef>& params, const std::vector<Vec>& grads, double lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("adamw: tensor count mismatch");
    if (m_.empty()) {
        for (const TensorRef& p : params) {
            m_.emplace_back(p.size, 0.0);
            v_.emplace_back(p.size, 0.0);
        }
    }
    for (std::size_t t = 0; t < params.size(); ++t) {
        if (params[t].size != grads[t].size()) throw std::invalid_argument("adamw: shape mismatch");
        if (!all_finite(grads[t])) throw std::runtime_error("diverged: non-finite gradient");
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t t = 0; t < params.size(); ++t) {
        double* w = params[t].data;
        const Vec& g = grads[t];
        Vec& m = m_[t];
        Vec& v = v_[t];
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            if (params[t].decay) w[i] -= lr * weight_decay_ * w[i];
        }
    }
}

double lr_schedule(std::size_t step, std::size_t total_steps, const ScheduleConfig& cfg) {
    if (step > total_steps) throw std::invalid_argument("lr_schedule: step beyond total");
    if (total_steps == 0) return 0.0;
    const double warmup = cfg.warmup_fraction * static_cast<double>(total_steps);
    const double s = static_cast<double>(step);
    if (warmup > 0.0 && s < warmup) return cfg.lr * s / warmup;
    const double span = static_cast<double>(total_steps) - warmup;
    if (span <= 0.0) return cfg.lr;
    const double t = (s - warmup) / span;
    if (cfg.kind == SchedulerKind::Linear) return cfg.lr * (1.0 - t);
    return cfg.lr * 0.5 * (1.0 + std::cos(M_PI * t));
}

double clip_gradients(std::vector<Vec>& grads, double max_norm) {
    if (max_norm <= 0.0) throw std::invalid_argument("clip_gradients: max_norm must be positive");
    double sq = 0.0;
    for (const Vec& g : grads)
        for (double x : g) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (Vec& g : grads)
            for (double& x : g) x *= scale;
    }
    return norm;
}

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "bce") return LossKind::Bce;
    if (name == "focal") return LossKind::Focal;
    if (name == "asymmetric") return LossKind::Asymmetric;
    if (name == "base") return LossKind::Base;
    if (name == "msc") return LossKind::Msc;
    if (name == "jscl") return LossKind::Jscl;
    if (name == "con") return LossKind::Con;
    throw std::invalid_argument("unknown loss: " + name);
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Bce: return "bce";
        case LossKind::Focal: return "focal";
        case LossKind::Asymmetric: return "asymmetric";
        case LossKind::Base: return "base";
        case LossKind::Msc: return "msc";
        case LossKind::Jscl: return "jscl";
        case LossKind::Con: return "con";
    }
    return "?";
}

std::vector<NamedTensor> state_to_tensors(const TrainedState& state) {
    std::vector<NamedTensor> out = encoder_to_tensors(state.encoder, "encoder");
    if (!state.momentum_encoder.backbone.empty()) {
        auto mt = encoder_to_tensors(state.momentum_encoder, "momentum");
        out.insert(out.end(), mt.begin(), mt.end());
    }
    if (state.prototypes.c.rows > 0)
        out.push_back({"prototypes", {state.prototypes.c.rows, state.prototypes.c.cols},
                       state.prototypes.c.values});
    if (state.queue_keys.rows > 0) {
        out.push_back({"queue.keys", {state.queue_keys.rows, state.queue_keys.cols},
                       state.queue_keys.values});
        DenseMatrix lab = labels_to_matrix(state.queue_labels);
        out.push_back({"queue.labels", {lab.rows, lab.cols}, lab.values});
    }
    if (state.decoder.weight.rows > 0) {
        out.push_back({"decoder.weight", {state.decoder.weight.rows, state.decoder.weight.cols},
                       state.decoder.weight.values});
        out.push_back({"decoder.bias", {state.decoder.bias.size()}, state.decoder.bias});
    }
    return out;
}

TrainedState state_from_tensors(const std::vector<NamedTensor>& tensors) {
    TrainedState state;
    state.encoder = encoder_from_tensors(tensors, "encoder");
    if (find_tensor(tensors, "momentum.backbone.0.weight"))
        state.momentum_encoder = encoder_from_tensors(tensors, "momentum");
    else
        state.momentum_encoder = state.encoder;
    if (const NamedTensor* t = find_tensor(tensors, "prototypes")) {
        state.prototypes.c = DenseMatrix(t->dims[0], t->dims[1]);
        state.prototypes.c.values = t->data;
    }
    if (const NamedTensor* t = find_tensor(tensors, "queue.keys")) {
        state.queue_keys = DenseMatrix(t->dims[0], t->dims[1]);
        state.queue_keys.values = t->data;
        const NamedTensor* lab = find_tensor(tensors, "queue.labels");
        if (!lab) throw std::runtime_error("checkpoint: queue keys without labels");
        state.queue_labels.resize(lab->dims[0]);
        for (std::size_t i = 0; i < lab->dims[0]; ++i) {
            LabelVector y(lab->dims[1]);
            for (std::size_t j = 0; j < lab->dims[1]; ++j)
                if (lab->data[i * lab->dims[1] + j] != 0.0) y.set(j);
            state.queue_labels[i] = y;
        }
    }
    if (const NamedTensor* t = find_tensor(tensors, "decoder.weight")) {
        state.decoder.weight = DenseMatrix(t->dims[0], t->dims[1]);
        state.decoder.weight.values = t->data;
        const NamedTensor* b = find_tensor(tensors, "decoder.bias");
        if (!b) throw std::runtime_error("checkpoint: decoder weight without bias");
        state.decoder.bias = b->data;
    }
    return state;
}

DenseMatrix backbone_representations(const EncoderParams& params, const DenseMatrix& features) {
    DenseMatrix out(features.rows, params.repr_dim());
    for (std::size_t i = 0; i < features.rows; ++i) {
        const EncoderOutput enc = encode(params, features.row(i));
        auto dst = out.row(i);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = enc.backbone_repr[c];
    }
    return out;
}

DenseMatrix projected_embeddings(const EncoderParams& params, const DenseMatrix& features) {
    DenseMatrix out(features.rows, params.embed_dim());
    for (std::size_t i = 0; i < features.rows; ++i) {
        const EncoderOutput enc = encode(params, features.row(i));
        auto dst = out.row(i);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = enc.projected[c];
    }
    return out;
}

namespace {

ContrastiveLossOutput contrastive_dispatch(LossKind kind, const ContrastiveContext& ctx,
                                           const LossConfig& cfg) {
    switch (kind) {
        case LossKind::Msc: return msc_loss(ctx, cfg);
        case LossKind::Base:
            return base_contrastive_loss(*ctx.batch, *ctx.batch_labels, cfg.tau);
        case LossKind::Jscl: return jscl_loss(*ctx.batch, *ctx.batch_labels, cfg.tau);
        case LossKind::Con: return con_loss(*ctx.batch, *ctx.batch_labels, cfg.tau);
        default: throw std::invalid_argument("not a contrastive loss");
    }
}

double validation_micro_f1(const TrainedState& state, const DatasetSplits& data,
                           const LinearEvalConfig& eval_cfg) {
    const DenseMatrix train_repr = backbone_representations(state.encoder, data.train.features);
    const DenseMatrix val_repr = backbone_representations(state.encoder, data.val.features);
    const LinearEvalResult r =
        linear_evaluation(train_repr, data.train.labels, val_repr, data.val.labels, val_repr,
                          data.val.labels, eval_cfg);
    return r.val.micro_f1;
}

}  // namespace

TrainResult train_contrastive(const DatasetSplits& data, const TrainConfig& cfg) {
    const std::size_t n = data.train.size();
    const std::size_t input_dim = data.train.feature_dim();
    const std::size_t num_labels = data.train.num_labels();

    SeededRng rng(cfg.seed);
    EncoderParams encoder =
        init_encoder(input_dim, cfg.hidden_dim, cfg.num_hidden_layers, cfg.embed_dim, rng);
    EncoderParams momentum_encoder = encoder;
    PrototypeBank prototypes = init_prototypes(num_labels, cfg.embed_dim, rng);
    KeyQueue queue(cfg.queue_capacity, cfg.embed_dim, num_labels);

    std::vector<TensorRef> refs = encoder_tensor_refs(encoder, "encoder");
    refs.push_back({"prototypes", prototypes.c.values.data(), prototypes.c.values.size(), false});
    AdamW opt(cfg.weight_decay);
    const ScheduleConfig sched{cfg.lr, cfg.warmup_fraction, cfg.scheduler};

    const std::size_t steps_per_epoch = batch_indices(n, cfg.batch_size, cfg.seed, 0).size();
    const std::size_t total_steps = cfg.epochs * steps_per_epoch;

    auto snapshot = [&]() {
        TrainedState s;
        s.encoder = encoder;
        s.momentum_encoder = momentum_encoder;
        s.prototypes = prototypes;
        s.queue_keys = queue.keys();
        s.queue_labels = queue.labels();
        return s;
    };

    auto batch_loss = [&](const EncoderParams& enc, const Dataset& ds,
                          const std::vector<std::size_t>& idx, const DenseMatrix& queue_keys,
                          const std::vector<LabelVector>& queue_labels,
                          std::vector<EncoderCache>* caches, DenseMatrix* batch_out,
                          std::vector<LabelVector>* labels_out) -> ContrastiveLossOutput {
        const std::size_t b = idx.size();
        DenseMatrix batch(b, cfg.embed_dim);
        std::vector<LabelVector> labels(b);
        if (caches) caches->resize(b);
        for (std::size_t t = 0; t < b; ++t) {
            EncoderOutput out = encode(enc, ds.features.row(idx[t]), caches ? &(*caches)[t] : nullptr);
            auto dst = batch.row(t);
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = out.projected[c];
            labels[t] = ds.labels[idx[t]];
        }
        ContrastiveContext ctx;
        ctx.batch = &batch;
        ctx.batch_labels = &labels;
        ctx.queue_keys = &queue_keys;
        ctx.queue_labels = &queue_labels;
        ctx.prototypes = cfg.loss_cfg.use_prototypes ? &prototypes.c : nullptr;
        ContrastiveLossOutput loss = contrastive_dispatch(cfg.loss, ctx, cfg.loss_cfg);
        if (batch_out) *batch_out = std::move(batch);
        if (labels_out) *labels_out = std::move(labels);
        return loss;
    };

    TrainResult result;
    double best_train = std::numeric_limits<double>::infinity();
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_train_epoch = 0, best_val_epoch = 0;
    std::size_t step = 0;
    double current_lr = 0.0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = batch_indices(n, cfg.batch_size, cfg.seed, epoch);
        double epoch_loss = 0.0;
        for (const auto& idx : batches) {
            current_lr = lr_schedule(std::min(step + 1, total_steps), total_steps, sched);

            // keys from the momentum encoder, detached
            DenseMatrix keys(idx.size(), cfg.embed_dim);
            std::vector<LabelVector> key_labels(idx.size());
            for (std::size_t t = 0; t < idx.size(); ++t) {
                EncoderOutput out = encode(momentum_encoder, data.train.features.row(idx[t]));
                auto dst = keys.row(t);
                for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = out.projected[c];
                key_labels[t] = data.train.labels[idx[t]];
            }

            const DenseMatrix queue_keys = queue.keys();
            const std::vector<LabelVector> queue_labels = queue.labels();
            std::vector<EncoderCache> caches;
            ContrastiveLossOutput loss = batch_loss(encoder, data.train, idx, queue_keys,
                                                    queue_labels, &caches, nullptr, nullptr);
            if (!std::isfinite(loss.value)) throw std::runtime_error("diverged: non-finite loss");
            epoch_loss += loss.value;

            EncoderGrads enc_grads = zero_grads(encoder);
            for (std::size_t t = 0; t < idx.size(); ++t)
                encoder_backward(encoder, caches[t], loss.batch_grads.row(t), {}, enc_grads);

            std::vector<Vec> grads = encoder_grads_to_flat(enc_grads);
            grads.push_back(cfg.loss_cfg.use_prototypes && loss.prototype_grads.rows > 0
                                ? loss.prototype_grads.values
                                : Vec(prototypes.c.values.size(), 0.0));
            clip_gradients(grads, cfg.clip_norm);
            opt.step(refs, grads, current_lr);
            prototypes.renormalize();
            momentum_update(momentum_encoder, encoder, cfg.momentum);
            queue.push(keys, key_labels);
            ++step;
        }
        const double train_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(batches.size(), 1));

        // validation loss against the current queue, no state mutation
        const DenseMatrix vq_keys = queue.keys();
        const std::vector<LabelVector> vq_labels = queue.labels();
        const auto val_batches = batch_indices(data.val.size(), cfg.batch_size, cfg.seed, 0);
        double val_loss = 0.0;
        for (const auto& idx : val_batches)
            val_loss +=
                batch_loss(encoder, data.val, idx, vq_keys, vq_labels, nullptr, nullptr, nullptr)
                    .value;
        val_loss /= static_cast<double>(std::max<std::size_t>(val_batches.size(), 1));

        result.log.push_back({epoch, train_loss, val_loss, -1.0, current_lr});
        if (train_loss < best_train) {
            best_train = train_loss;
            result.best_train_loss = snapshot();
            best_train_epoch = epoch;
        }
        if (val_loss < best_val) {
            best_val = val_loss;
            result.best_val_loss = snapshot();
            best_val_epoch = epoch;
        }
    }
    result.last = snapshot();
    if (result.best_train_loss.encoder.backbone.empty()) result.best_train_loss = result.last;
    if (result.best_val_loss.encoder.backbone.empty()) result.best_val_loss = result.last;

    if (cfg.select == CheckpointSelect::Last) {
        result.selected = result.last;
    } else {
        // candidates ordered oldest-first; ties go to the latest
        struct Candidate {
            const TrainedState* state;
            std::size_t epoch;
        };
        std::vector<Candidate> cands;
        if (best_train_epoch <= best_val_epoch) {
            cands.push_back({&result.best_train_loss, best_train_epoch});
            cands.push_back({&result.best_val_loss, best_val_epoch});
        } else {
            cands.push_back({&result.best_val_loss, best_val_epoch});
            cands.push_back({&result.best_train_loss, best_train_epoch});
        }
        cands.push_back({&result.last, cfg.epochs});
        double best_f1 = -1.0;
        for (const Candidate& c : cands) {
            const double f1 = validation_micro_f1(*c.state, data, cfg.eval_cfg);
            if (f1 >= best_f1) {  // >= breaks ties toward the latest
                best_f1 = f1;
                result.selected = *c.state;
            }
        }
    }
    return result;
}

TrainResult train_supervised(const DatasetSplits& data, const TrainConfig& cfg) {
    if (cfg.loss != LossKind::Bce && cfg.loss != LossKind::Focal &&
        cfg.loss != LossKind::Asymmetric)
        throw std::invalid_argument("train_supervised: needs a BCE-family loss");
    const std::size_t n = data.train.size();
    const std::size_t input_dim = data.train.feature_dim();
    const std::size_t num_labels = data.train.num_labels();

    SeededRng rng(cfg.seed);
    EncoderParams encoder =
        init_encoder(input_dim, cfg.hidden_dim, cfg.num_hidden_layers, cfg.embed_dim, rng);
    Linear decoder(num_labels, cfg.hidden_dim, /*with_bias=*/true);
    {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
        for (double& w : decoder.weight.values) w = rng.uniform(-bound, bound);
        for (double& b : decoder.bias) b = rng.uniform(-bound, bound);
    }

    // backbone + decoder only; the projection head plays no role here
    std::vector<TensorRef> refs;
    for (std::size_t l = 0; l < encoder.backbone.size(); ++l) {
        const std::string base = "encoder.backbone." + std::to_string(l);
        refs.push_back({base + ".weight", encoder.backbone[l].weight.values.data(),
                        encoder.backbone[l].weight.values.size(), true});
        refs.push_back({base + ".bias", encoder.backbone[l].bias.data(),
                        encoder.backbone[l].bias.size(), false});
    }
    refs.push_back({"decoder.weight", decoder.weight.values.data(),
                    decoder.weight.values.size(), true});
    refs.push_back({"decoder.bias", decoder.bias.data(), decoder.bias.size(), false});

    AdamW opt(cfg.weight_decay);
    const ScheduleConfig sched{cfg.lr, cfg.warmup_fraction, cfg.scheduler};
    const std::size_t steps_per_epoch = batch_indices(n, cfg.batch_size, cfg.seed, 0).size();
    const std::size_t total_steps = cfg.epochs * steps_per_epoch;

    auto dispatch = [&](const DenseMatrix& probs, const DenseMatrix& labels) {
        switch (cfg.loss) {
            case LossKind::Bce: return bce_loss(probs, labels);
            case LossKind::Focal: return focal_loss(probs, labels, cfg.loss_cfg.gamma);
            default:
                return asymmetric_loss(probs, labels, cfg.loss_cfg.gamma_pos,
                                       cfg.loss_cfg.gamma_neg, cfg.loss_cfg.margin);
        }
    };

    auto eval_split = [&](const Dataset& ds, double* loss_out) {
        std::vector<LabelVector> pred(ds.size(), LabelVector(num_labels));
        DenseMatrix probs(ds.size(), num_labels);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const EncoderOutput out = encode(encoder, ds.features.row(i));
            for (std::size_t j = 0; j < num_labels; ++j) {
                double logit = decoder.bias[j];
                const auto w = decoder.weight.row(j);
                for (std::size_t c = 0; c < w.size(); ++c) logit += w[c] * out.backbone_repr[c];
                const double p = 1.0 / (1.0 + std::exp(-logit));
                probs.at(i, j) = p;
                if (p >= 0.5) pred[i].set(j);
            }
        }
        if (loss_out) *loss_out = dispatch(probs, labels_to_matrix(ds.labels)).value;
        return classification_metrics(pred, ds.labels);
    };

    TrainResult result;
    double best_f1 = -1.0;
    std::size_t step = 0;
    double current_lr = 0.0;

    auto snapshot = [&]() {
        TrainedState s;
        s.encoder = encoder;
        s.momentum_encoder = encoder;
        s.decoder = decoder;
        return s;
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = batch_indices(n, cfg.batch_size, cfg.seed, epoch);
        double epoch_loss = 0.0;
        for (const auto& idx : batches) {
            current_lr = lr_schedule(std::min(step + 1, total_steps), total_steps, sched);
            const std::size_t b = idx.size();

            std::vector<EncoderCache> caches(b);
            DenseMatrix probs(b, num_labels);
            std::vector<Vec> reprs(b);
            for (std::size_t t = 0; t < b; ++t) {
                const EncoderOutput out = encode(encoder, data.train.features.row(idx[t]), &caches[t]);
                reprs[t] = out.backbone_repr;
                for (std::size_t j = 0; j < num_labels; ++j) {
                    double logit = decoder.bias[j];
                    const auto w = decoder.weight.row(j);
                    for (std::size_t c = 0; c < w.size(); ++c) logit += w[c] * reprs[t][c];
                    probs.at(t, j) = 1.0 / (1.0 + std::exp(-logit));
                }
            }
            DenseMatrix truth(b, num_labels);
            for (std::size_t t = 0; t < b; ++t)
                for (std::size_t j = 0; j < num_labels; ++j)
                    truth.at(t, j) = data.train.labels[idx[t]].has(j) ? 1.0 : 0.0;

            const ProbLossOutput loss = dispatch(probs, truth);
            if (!std::isfinite(loss.value)) throw std::runtime_error("diverged: non-finite loss");
            epoch_loss += loss.value;

            EncoderGrads enc_grads = zero_grads(encoder);
            Linear dec_grad(num_labels, cfg.hidden_dim, true);
            for (std::size_t t = 0; t < b; ++t) {
                Vec grad_repr(cfg.hidden_dim, 0.0);
                for (std::size_t j = 0; j < num_labels; ++j) {
                    const double p = probs.at(t, j);
                    const double g_logit = loss.prob_grads.at(t, j) * p * (1.0 - p);
                    dec_grad.bias[j] += g_logit;
                    const auto w = decoder.weight.row(j);
                    auto gw = dec_grad.weight.row(j);
                    for (std::size_t c = 0; c < w.size(); ++c) {
                        gw[c] += g_logit * reprs[t][c];
                        grad_repr[c] += g_logit * w[c];
                    }
                }
                encoder_backward(encoder, caches[t], {}, grad_repr, enc_grads);
            }

            std::vector<Vec> grads;
            for (std::size_t l = 0; l < enc_grads.backbone.size(); ++l) {
                grads.push_back(enc_grads.backbone[l].weight.values);
                grads.push_back(enc_grads.backbone[l].bias);
            }
            grads.push_back(dec_grad.weight.values);
            grads.push_back(dec_grad.bias);
            clip_gradients(grads, cfg.clip_norm);
            opt.step(refs, grads, current_lr);
            ++step;
        }

        double val_loss = 0.0;
        const MetricsRecord val = eval_split(data.val, &val_loss);
        result.log.push_back({epoch, epoch_loss / static_cast<double>(std::max<std::size_t>(batches.size(), 1)),
                              val_loss, val.micro_f1, current_lr});
        if (val.micro_f1 >= best_f1) {  // ties toward the latest epoch
            best_f1 = val.micro_f1;
            result.selected = snapshot();
        }
    }
    result.last = snapshot();
    result.best_train_loss = result.selected;
    result.best_val_loss = result.selected;
    if (result.selected.encoder.backbone.empty()) result.selected = result.last;
    return result;
}

// ---------------------------------------------------------------------------
// Finite-difference harness

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-2});
}

DenseMatrix random_unit_rows(std::size_t rows, std::size_t d, SeededRng& rng) {
    DenseMatrix m(rows, d);
    for (std::size_t i = 0; i < rows; ++i) {
        Vec v(d);
        for (double& x : v) x = rng.gaussian();
        const Vec u = l2_normalize(v);
        auto row = m.row(i);
        for (std::size_t c = 0; c < d; ++c) row[c] = u[c];
    }
    return m;
}

std::vector<LabelVector> random_labels(std::size_t n, std::size_t num_labels, SeededRng& rng) {
    std::vector<LabelVector> out(n, LabelVector(num_labels));
    for (std::size_t i = 0; i < n; ++i) {
        bool any = false;
        for (std::size_t j = 0; j < num_labels; ++j) {
            if (rng.uniform() < 0.35) {
                out[i].set(j);
                any = true;
            }
        }
        if (!any) out[i].set(rng.uniform_index(num_labels));
    }
    return out;
}

// max relative error between analytic grads and central differences over
// a list of (value pointer, analytic gradient) pairs
double check_scalars(const std::function<double()>& eval, std::vector<double*> where,
                     const std::vector<double>& analytic, double eps) {
    double worst = 0.0;
    for (std::size_t k = 0; k < where.size(); ++k) {
        const double saved = *where[k];
        *where[k] = saved + eps;
        const double ahead = eval();
        *where[k] = saved - eps;
        const double behind = eval();
        *where[k] = saved;
        const double numeric = (ahead - behind) / (2.0 * eps);
        worst = std::max(worst, rel_err(analytic[k], numeric));
    }
    return worst;
}

}  // namespace

double grad_check(LossKind kind, const LossConfig& cfg, const GradCheckSpec& spec) {
    SeededRng rng(spec.seed);
    if (kind == LossKind::Bce || kind == LossKind::Focal || kind == LossKind::Asymmetric) {
        DenseMatrix probs(spec.batch, spec.num_labels);
        DenseMatrix labels(spec.batch, spec.num_labels);
        for (std::size_t k = 0; k < probs.values.size(); ++k) {
            double p = rng.uniform(0.05, 0.95);
            // keep clear of the asymmetric margin kink
            while (std::abs(p - cfg.margin) < 1e-3) p = rng.uniform(0.05, 0.95);
            probs.values[k] = p;
            labels.values[k] = rng.uniform() < 0.5 ? 1.0 : 0.0;
        }
        auto eval = [&]() {
            switch (kind) {
                case LossKind::Bce: return bce_loss(probs, labels).value;
                case LossKind::Focal: return focal_loss(probs, labels, cfg.gamma).value;
                default:
                    return asymmetric_loss(probs, labels, cfg.gamma_pos, cfg.gamma_neg, cfg.margin)
                        .value;
            }
        };
        ProbLossOutput out;
        switch (kind) {
            case LossKind::Bce: out = bce_loss(probs, labels); break;
            case LossKind::Focal: out = focal_loss(probs, labels, cfg.gamma); break;
            default:
                out = asymmetric_loss(probs, labels, cfg.gamma_pos, cfg.gamma_neg, cfg.margin);
        }
        std::vector<double*> where;
        std::vector<double> analytic;
        for (std::size_t k = 0; k < probs.values.size(); ++k) {
            where.push_back(&probs.values[k]);
            analytic.push_back(out.prob_grads.values[k]);
        }
        return check_scalars(eval, where, analytic, spec.epsilon);
    }

    DenseMatrix batch = random_unit_rows(spec.batch, spec.dim, rng);
    std::vector<LabelVector> labels = random_labels(spec.batch, spec.num_labels, rng);
    DenseMatrix queue_keys = random_unit_rows(spec.queue, spec.dim, rng);
    std::vector<LabelVector> queue_labels = random_labels(spec.queue, spec.num_labels, rng);
    DenseMatrix protos = random_unit_rows(spec.num_labels, spec.dim, rng);

    ContrastiveContext ctx;
    ctx.batch = &batch;
    ctx.batch_labels = &labels;
    ctx.queue_keys = &queue_keys;
    ctx.queue_labels = &queue_labels;
    ctx.prototypes = cfg.use_prototypes ? &protos : nullptr;

    auto eval = [&]() { return contrastive_dispatch(kind, ctx, cfg).value; };
    const ContrastiveLossOutput out = contrastive_dispatch(kind, ctx, cfg);

    std::vector<double*> where;
    std::vector<double> analytic;
    for (std::size_t k = 0; k < batch.values.size(); ++k) {
        where.push_back(&batch.values[k]);
        analytic.push_back(out.batch_grads.values[k]);
    }
    if (kind == LossKind::Msc && cfg.use_prototypes) {
        for (std::size_t k = 0; k < protos.values.size(); ++k) {
            where.push_back(&protos.values[k]);
            analytic.push_back(out.prototype_grads.values[k]);
        }
    }
    return check_scalars(eval, where, analytic, spec.epsilon);
}

double grad_check_mulcon(const GradCheckSpec& spec, double tau) {
    SeededRng rng(spec.seed);
    PerLabelEmbeddings emb;
    emb.n = spec.batch;
    emb.num_labels = spec.num_labels;
    emb.dim = spec.dim;
    emb.values.resize(emb.n * emb.num_labels * emb.dim);
    emb.mask.resize(emb.n * emb.num_labels);
    for (double& v : emb.values) v = rng.gaussian();
    for (auto& m : emb.mask) m = rng.uniform() < 0.6 ? 1 : 0;
    // force a positive pair on label 0
    emb.mask[0] = 1;
    emb.mask[emb.num_labels] = 1;

    auto eval = [&]() { return mulcon_loss(emb, tau).value; };
    const MulConLossOutput out = mulcon_loss(emb, tau);

    std::vector<double*> where;
    std::vector<double> analytic;
    for (std::size_t i = 0; i < emb.n; ++i)
        for (std::size_t j = 0; j < emb.num_labels; ++j) {
            if (!emb.present(i, j)) continue;
            const std::size_t base = (i * emb.num_labels + j) * emb.dim;
            for (std::size_t c = 0; c < emb.dim; ++c) {
                where.push_back(&emb.values[base + c]);
                analytic.push_back(out.grads[base + c]);
            }
        }
    return check_scalars(eval, where, analytic, spec.epsilon);
}

double grad_check_encoder(std::uint64_t seed, double epsilon) {
    SeededRng rng(seed);
    const std::size_t input_dim = 6, hidden = 8, embed = 5;
    EncoderParams params = init_encoder(input_dim, hidden, 2, embed, rng);
    Vec x(input_dim);
    // resample inputs that land every ReLU dead (zero projection output is
    // a genuine domain error, not a differentiable point)
    for (int attempt = 0;; ++attempt) {
        for (double& v : x) v = rng.gaussian();
        try {
            encode(params, x);
            break;
        } catch (const std::domain_error&) {
            if (attempt > 100) throw;
        }
    }
    Vec u(embed), w(hidden);
    for (double& v : u) v = rng.gaussian();
    for (double& v : w) v = rng.gaussian();

    auto eval = [&]() {
        const EncoderOutput out = encode(params, x);
        return dot(u, out.projected) + dot(w, out.backbone_repr);
    };

    EncoderCache cache;
    encode(params, x, &cache);
    EncoderGrads grads = zero_grads(params);
    encoder_backward(params, cache, u, w, grads);

    std::vector<double*> where;
    std::vector<double> analytic;
    auto add = [&](std::vector<double>& p, const std::vector<double>& g) {
        for (std::size_t k = 0; k < p.size(); ++k) {
            where.push_back(&p[k]);
            analytic.push_back(g[k]);
        }
    };
    for (std::size_t l = 0; l < params.backbone.size(); ++l) {
        add(params.backbone[l].weight.values, grads.backbone[l].weight.values);
        add(params.backbone[l].bias, grads.backbone[l].bias);
    }
    add(params.proj1.weight.values, grads.proj1.weight.values);
    add(params.proj2.weight.values, grads.proj2.weight.values);
    add(x, grads.input_grad);
    return check_scalars(eval, where, analytic, epsilon);
}

}  // namespace mlcl
