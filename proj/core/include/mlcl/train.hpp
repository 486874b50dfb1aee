#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mlcl/checkpoint.hpp"
#include "mlcl/data.hpp"
#include "mlcl/encoder.hpp"
#include "mlcl/eval.hpp"
#include "mlcl/losses.hpp"
#include "mlcl/memory.hpp"

namespace mlcl {

/// Mutable view of one parameter tensor for the optimizer and the
/// gradient clipper. `decay` marks tensors subject to weight decay
/// (biases are excluded).
struct TensorRef {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
    bool decay = true;
};

std::vector<TensorRef> encoder_tensor_refs(EncoderParams& params, const std::string& prefix);

/// AdamW with decoupled weight decay. Throws "diverged" on non-finite
/// gradients.
class AdamW {
public:
    AdamW(double weight_decay = 0.01, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8);

    void step(const std::vector<TensorRef>& params, const std::vector<Vec>& grads, double lr);
    std::size_t step_count() const { return step_; }

private:
    double weight_decay_, beta1_, beta2_, eps_;
    std::size_t step_ = 0;
    std::vector<Vec> m_, v_;
};

enum class SchedulerKind { Linear, Cosine };

struct ScheduleConfig {
    double lr = 1e-3;
    double warmup_fraction = 0.05;
    SchedulerKind kind = SchedulerKind::Cosine;
};

/// Linear warmup to lr, then linear or cosine decay to 0.
double lr_schedule(std::size_t step, std::size_t total_steps, const ScheduleConfig& cfg);

/// Rescales so the global L2 norm is at most max_norm; returns the
/// pre-clip norm.
double clip_gradients(std::vector<Vec>& grads, double max_norm);

enum class LossKind { Bce, Focal, Asymmetric, Base, Msc, Jscl, Con };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

enum class CheckpointSelect { Last, BestValF1 };

struct TrainConfig {
    std::size_t epochs = 40;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    double weight_decay = 0.01;
    double warmup_fraction = 0.05;
    SchedulerKind scheduler = SchedulerKind::Cosine;
    double clip_norm = 1.0;
    std::uint64_t seed = 1;
    LossKind loss = LossKind::Msc;
    LossConfig loss_cfg;
    std::size_t queue_capacity = 256;
    double momentum = 0.999;
    std::size_t hidden_dim = 64;
    std::size_t num_hidden_layers = 2;
    std::size_t embed_dim = 32;
    CheckpointSelect select = CheckpointSelect::BestValF1;
    LinearEvalConfig eval_cfg;  // used for checkpoint selection
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_micro_f1 = -1.0;  // -1 => not evaluated this epoch
    double lr = 0.0;
};

/// A full training state snapshot: query encoder, momentum encoder,
/// prototypes, queue contents, and (for supervised runs) the decoder.
struct TrainedState {
    EncoderParams encoder;
    EncoderParams momentum_encoder;
    PrototypeBank prototypes;
    DenseMatrix queue_keys;
    std::vector<LabelVector> queue_labels;
    Linear decoder;  // supervised head; empty for contrastive runs
};

std::vector<NamedTensor> state_to_tensors(const TrainedState& state);
TrainedState state_from_tensors(const std::vector<NamedTensor>& tensors);

struct TrainResult {
    TrainedState last;
    TrainedState best_train_loss;
    TrainedState best_val_loss;
    TrainedState selected;
    std::vector<EpochRecord> log;
};

/// Contrastive pretraining with momentum encoder, key queue, and
/// prototypes; retains last / lowest-train-loss / lowest-val-loss
/// checkpoints and selects among them.
TrainResult train_contrastive(const DatasetSplits& data, const TrainConfig& cfg);

/// Supervised training of backbone + linear decoder with a BCE-family
/// loss; keeps the epoch with the best validation micro-F1 (ties to the
/// latest).
TrainResult train_supervised(const DatasetSplits& data, const TrainConfig& cfg);

/// Frozen representations (projection head discarded).
DenseMatrix backbone_representations(const EncoderParams& params, const DenseMatrix& features);
/// Unit-norm projected embeddings.
DenseMatrix projected_embeddings(const EncoderParams& params, const DenseMatrix& features);

/// Central-difference gradient check of one loss, on a seeded random
/// instance. Returns the max relative error over every checked scalar.
struct GradCheckSpec {
    std::size_t batch = 8;
    std::size_t num_labels = 6;
    std::size_t dim = 16;
    std::size_t queue = 16;
    double epsilon = 1e-5;
    std::uint64_t seed = 7;
};

double grad_check(LossKind kind, const LossConfig& cfg, const GradCheckSpec& spec);
/// Same harness for the per-label collapse loss.
double grad_check_mulcon(const GradCheckSpec& spec, double tau);
/// Finite-difference check of the encoder backward pass (all parameters).
double grad_check_encoder(std::uint64_t seed, double epsilon = 1e-5);

}  // namespace mlcl
