#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcseg/model.hpp"

namespace mcseg {

struct EncoderShape {
    int num_layers = 3;
    int num_heads = 4;
    int d_h = 64;
    int d_ff = 256;
    int max_seq_len = 128;
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double lr = 2e-5;  // fine-tuning default; raise to ~1e-3 for from-scratch toy models
    double weight_decay = 0.01;
    double dropout = 0.1;
    double alpha = 0.15;  // distillation trade-off
    std::uint64_t seed = 0;
    int patience = 5;      // early-stop patience on macro dev F1
    double dev_ratio = 0.1;
    bool verbose = false;  // per-epoch progress to stderr

    void validate() const {
        if (epochs < 1 || batch_size < 1)
            throw std::invalid_argument("TrainConfig: epochs and batch_size must be positive");
        if (alpha < 0.0) throw std::invalid_argument("TrainConfig: alpha must be >= 0");
    }
};

struct LabeledCorpus {
    std::string domain;
    std::vector<TaggedSentence> sentences;
};

struct TrainReport {
    double initial_loss = 0.0;            // mean per-sentence loss before any update
    std::vector<double> epoch_loss;       // mean per-sentence loss per epoch
    std::vector<std::string> domains;
    std::vector<std::vector<double>> dev_f1;  // [domain][epoch]
    std::vector<double> dev_f1_macro;         // per epoch
    int best_epoch = -1;                      // 0-based; -1 if dev never evaluated
    double best_f1 = 0.0;
    int epochs_completed = 0;
};

std::string train_report_to_json(const TrainReport& report);

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, TrainReport partial)
        : std::runtime_error(what), report(std::move(partial)) {}
    TrainReport report;
};

struct TrainedModel {
    Model model;
    TrainReport report;
};

// Multi-criteria training: one encoder, one private projection per corpus,
// one shared projection, one CRF head. Minimizes the summed negative CRF
// log-likelihood over interleaved single-domain batches; early-stops on
// macro dev F1. Deterministic per config.seed.
TrainedModel train_teacher(const std::vector<LabeledCorpus>& corpora, const EncoderShape& shape,
                           const TrainConfig& config);

// Distillation: student encoder = bottom k layers of the (frozen) teacher,
// fresh projections and CRF head, objective = J_seg + alpha * J_dis with
// teacher emission scores as the regression target.
TrainedModel train_student(const Model& teacher, int k_layers,
                           const std::vector<LabeledCorpus>& corpora,
                           const TrainConfig& config);

// Ablation: exactly one corpus, no shared projection parameters at all;
// the emission head consumes the duplicated private representation.
TrainedModel train_single_criteria(const LabeledCorpus& corpus, const EncoderShape& shape,
                                   const TrainConfig& config);

// Freezes every model parameter, mixes the frozen per-layer hidden states
// with softmax-normalized scalar weights, and fine-tunes only the mixing
// weights plus fresh copies of the projection/CRF head on `corpus`.
// Returns the learned weight distribution over layers (sums to 1).
// Models with fewer than 2 layers are rejected.
std::vector<double> layer_attention_probe(const Model& model, const LabeledCorpus& corpus,
                                          const TrainConfig& config);

}  // namespace mcseg
