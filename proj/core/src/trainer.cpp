#include "mcseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <span>

#include <json.hpp>

#include "mcseg/adam.hpp"
#include "mcseg/distill.hpp"
#include "mcseg/metrics.hpp"
#include "mcseg/tensor_ops.hpp"

namespace mcseg {

using nlohmann::ordered_json;

namespace {

// Sentence forward on the tape up to emission scores [n,4].
Var sentence_scores(Tape& tape, BoundParams& bp, const Model& model,
                    std::span<const int> ids, const std::string& domain, Rng& drop_rng,
                    bool training) {
    EncoderConfig cfg = model.meta.encoder;
    Var h = encode_train(tape, bp, cfg, ids, drop_rng, training);
    Var hd, hs;
    if (model.meta.has_shared) {
        auto pr = project(tape, bp, h, domain, model.meta.domains);
        hd = pr.first;
        hs = pr.second;
    } else {
        hd = tape.add_rowvec(tape.matmul(h, bp[proj_names::weight(domain)]),
                             bp[proj_names::bias(domain)]);
        hs = hd;  // duplicated private representation
    }
    return emission_scores(tape, hd, hs, bp[crf_names::kWeight], bp[crf_names::kBias]);
}

// Inference-path emission scores for ids already in-vocabulary (teacher
// logits, dev decoding). No dropout, full precision.
Tensor infer_scores(const Model& model, std::span<const int> ids, const std::string& domain) {
    EncodeOptions opts;
    EncodeResult enc = encode(model.params, model.meta.encoder, ids, opts);
    std::pair<Tensor, Tensor> pr;
    if (model.meta.has_shared)
        pr = project(model.params, enc.hidden, domain, model.meta.domains);
    else
        pr = project_private_only(model.params, enc.hidden, domain, model.meta.domains);
    return emission_scores(pr.first, pr.second, model.params.at(crf_names::kWeight),
                           model.params.at(crf_names::kBias));
}

std::vector<std::string> words_utf8(const std::u32string& chars, const std::vector<Label>& tags) {
    std::vector<std::string> out;
    for (const auto& w : decode_tags(chars, tags)) out.push_back(encode_utf8(w));
    return out;
}

// Macro-averaged dev F1, one entry per domain with a non-empty dev set.
double eval_dev(const Model& model, const std::vector<LabeledCorpus>& dev,
                std::vector<double>& per_domain) {
    per_domain.assign(dev.size(), 0.0);
    double macro = 0.0;
    int counted = 0;
    for (std::size_t d = 0; d < dev.size(); ++d) {
        if (dev[d].sentences.empty()) {
            per_domain[d] = std::nan("");
            continue;
        }
        Segmentation gold, sys;
        const Tensor& trans = model.params.at(crf_names::kTrans);
        for (const TaggedSentence& ts : dev[d].sentences) {
            std::vector<int> ids = model.vocab.ids_for(ts.sentence.chars);
            Tensor scores = infer_scores(model, ids, dev[d].domain);
            auto [tags, score] = viterbi(scores, trans);
            gold.push_back(words_utf8(ts.sentence.chars, ts.tags));
            sys.push_back(words_utf8(ts.sentence.chars, tags));
        }
        per_domain[d] = prf(gold, sys).f1;
        macro += per_domain[d];
        ++counted;
    }
    return counted > 0 ? macro / counted : std::nan("");
}

struct BatchLoss {
    double value = 0.0;  // mean per-sentence combined loss
    GradMap grads;
};

// Forward/backward over one batch. teacher == nullptr means plain
// supervised training.
BatchLoss batch_step(Model& model, const Batch& batch, const std::string& domain,
                     const Model* teacher, double alpha, Rng& drop_rng, bool training) {
    Tape tape;
    BoundParams bp(tape, model.params);

    Var seg;
    std::vector<Var> student_logits;
    std::vector<Tensor> teacher_logits;
    for (int r = 0; r < batch.size(); ++r) {
        std::span<const int> ids(batch.ids[static_cast<std::size_t>(r)].data(),
                                 static_cast<std::size_t>(batch.lengths[static_cast<std::size_t>(r)]));
        std::vector<Label> tags(batch.tags[static_cast<std::size_t>(r)].begin(),
                                batch.tags[static_cast<std::size_t>(r)].begin() +
                                    batch.lengths[static_cast<std::size_t>(r)]);
        Var scores = sentence_scores(tape, bp, model, ids, domain, drop_rng, training);
        Var nll = tape.scale(crf_log_likelihood(tape, scores,
                                                bp[crf_names::kTrans], std::move(tags)),
                             -1.0);
        seg = r == 0 ? nll : tape.add(seg, nll);
        if (teacher) {
            student_logits.push_back(scores);
            teacher_logits.push_back(infer_scores(*teacher, ids, domain));
        }
    }

    Var total = seg;
    if (teacher) {
        Var dis = distill_loss(tape, student_logits, teacher_logits);
        total = combined_loss(tape, seg, dis, alpha);
    }
    // 1/B scaling conditions the step size without changing the objective.
    Var loss = tape.scale(total, 1.0 / batch.size());

    BatchLoss out;
    out.value = tape.value(loss)[0];
    if (!std::isfinite(out.value)) return out;  // caller aborts
    tape.backward(loss);
    out.grads = bp.grads();
    return out;
}

// Mean per-sentence loss over an epoch's batches without updating anything.
double eval_loss(Model& model, const std::vector<Batch>& batches,
                 const std::vector<std::string>& domains, const Model* teacher, double alpha,
                 std::uint64_t seed) {
    double total = 0.0;
    long sentences = 0;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        Rng drop_rng(Rng::mix(seed, 0xE0E0 + i));
        BatchLoss bl = batch_step(model, batches[i],
                                  domains[static_cast<std::size_t>(batches[i].domain)], teacher,
                                  alpha, drop_rng, /*training=*/false);
        total += bl.value * batches[i].size();
        sentences += batches[i].size();
    }
    return sentences > 0 ? total / static_cast<double>(sentences) : 0.0;
}

struct Snapshot {
    ParamStore params;
};

Snapshot snapshot_params(const ParamStore& store) {
    Snapshot s;
    for (const auto& name : store.names()) s.params.add(name, store.at(name));
    return s;
}

void restore_params(ParamStore& store, const Snapshot& snap) {
    for (const auto& name : snap.params.names()) store.at(name) = snap.params.at(name);
}

// Shared training loop. `teacher` enables the distillation term.
TrainedModel run_training(Model model, const std::vector<LabeledCorpus>& corpora,
                          const TrainConfig& config, const Model* teacher) {
    config.validate();

    // Per-domain dev split, seeded per domain.
    std::vector<std::vector<TaggedSentence>> train_parts;
    std::vector<LabeledCorpus> dev_parts;
    for (std::size_t d = 0; d < corpora.size(); ++d) {
        auto [train, dev] = split_dev(corpora[d].sentences, config.dev_ratio,
                                      Rng::mix(config.seed, 0xDE7 + d));
        train_parts.push_back(std::move(train));
        dev_parts.push_back({corpora[d].domain, std::move(dev)});
    }

    TrainReport report;
    report.domains.reserve(corpora.size());
    for (const auto& c : corpora) report.domains.push_back(c.domain);
    report.dev_f1.assign(corpora.size(), {});

    AdamConfig acfg;
    acfg.lr = config.lr;
    acfg.weight_decay = config.weight_decay;
    AdamState adam(acfg);

    const int max_len = model.meta.encoder.max_seq_len;
    {
        std::vector<Batch> first =
            make_batches(train_parts, model.vocab, config.batch_size, max_len,
                         Rng::mix(config.seed, 0xB000));
        report.initial_loss =
            eval_loss(model, first, report.domains, teacher, config.alpha, config.seed);
    }

    Snapshot best = snapshot_params(model.params);
    int stale = 0;
    bool have_dev = false;
    for (const auto& dp : dev_parts) have_dev = have_dev || !dp.sentences.empty();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<Batch> batches =
            make_batches(train_parts, model.vocab, config.batch_size, max_len,
                         Rng::mix(config.seed, 0xB000 + static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        long sentences = 0;
        for (std::size_t i = 0; i < batches.size(); ++i) {
            const Batch& batch = batches[i];
            Rng drop_rng(Rng::mix(config.seed,
                                  0xD0000000ULL + static_cast<std::uint64_t>(epoch) * 1000003ULL + i));
            BatchLoss bl =
                batch_step(model, batch, report.domains[static_cast<std::size_t>(batch.domain)],
                           teacher, config.alpha, drop_rng, /*training=*/true);
            if (!std::isfinite(bl.value)) {
                report.epochs_completed = epoch;
                throw TrainingDiverged("training diverged: non-finite loss at epoch " +
                                           std::to_string(epoch + 1),
                                       std::move(report));
            }
            try {
                adam.step(model.params, bl.grads);
            } catch (const std::runtime_error& e) {
                report.epochs_completed = epoch;
                throw TrainingDiverged(std::string("training diverged: ") + e.what(),
                                       std::move(report));
            }
            loss_sum += bl.value * batch.size();
            sentences += batch.size();
        }
        report.epoch_loss.push_back(sentences > 0 ? loss_sum / static_cast<double>(sentences)
                                                  : 0.0);

        std::vector<double> per_domain;
        const double macro = eval_dev(model, dev_parts, per_domain);
        for (std::size_t d = 0; d < per_domain.size(); ++d)
            report.dev_f1[d].push_back(per_domain[d]);
        report.dev_f1_macro.push_back(macro);
        report.epochs_completed = epoch + 1;

        if (config.verbose) {
            std::cerr << "epoch " << (epoch + 1) << "/" << config.epochs
                      << " loss=" << report.epoch_loss.back();
            if (have_dev) std::cerr << " dev_f1=" << macro;
            std::cerr << "\n";
        }

        if (have_dev && std::isfinite(macro)) {
            if (report.best_epoch < 0 || macro > report.best_f1) {
                report.best_f1 = macro;
                report.best_epoch = epoch;
                best = snapshot_params(model.params);
                stale = 0;
            } else if (++stale >= config.patience) {
                break;
            }
        }
    }

    if (have_dev && report.best_epoch >= 0)
        restore_params(model.params, best);  // never return a worse checkpoint
    return {std::move(model), std::move(report)};
}

Vocabulary build_vocab(const std::vector<LabeledCorpus>& corpora) {
    std::vector<std::vector<TaggedSentence>> all;
    for (const auto& c : corpora) all.push_back(c.sentences);
    return Vocabulary::build(all);
}

void check_corpora(const std::vector<LabeledCorpus>& corpora) {
    if (corpora.empty()) throw std::invalid_argument("trainer: need at least one corpus");
    for (const auto& c : corpora) {
        if (c.domain.empty() || c.domain == kSharedDomain)
            throw std::invalid_argument("trainer: invalid domain name '" + c.domain + "'");
        if (c.sentences.empty())
            throw std::invalid_argument("trainer: corpus '" + c.domain + "' is empty");
    }
}

EncoderConfig config_from_shape(const EncoderShape& shape, double dropout) {
    EncoderConfig cfg;
    cfg.num_layers = shape.num_layers;
    cfg.num_heads = shape.num_heads;
    cfg.d_h = shape.d_h;
    cfg.d_ff = shape.d_ff;
    cfg.max_seq_len = shape.max_seq_len;
    cfg.dropout_p = dropout;
    return cfg;
}

}  // namespace

TrainedModel train_teacher(const std::vector<LabeledCorpus>& corpora, const EncoderShape& shape,
                           const TrainConfig& config) {
    check_corpora(corpora);
    config.validate();
    Vocabulary vocab = build_vocab(corpora);
    EncoderConfig cfg = config_from_shape(shape, config.dropout);
    std::vector<std::string> domains;
    for (const auto& c : corpora) domains.push_back(c.domain);
    Model model = Model::create(cfg, domains, /*with_shared=*/true, vocab, config.seed);
    return run_training(std::move(model), corpora, config, nullptr);
}

TrainedModel train_student(const Model& teacher, int k_layers,
                           const std::vector<LabeledCorpus>& corpora,
                           const TrainConfig& config) {
    check_corpora(corpora);
    config.validate();
    if (k_layers < 0 || k_layers > teacher.meta.encoder.num_layers)
        throw std::invalid_argument("train_student: k_layers exceeds teacher depth");
    for (const auto& c : corpora) teacher.domain_index(c.domain);

    // Student: truncated teacher encoder, fresh projections and CRF head.
    Model student;
    student.meta = teacher.meta;
    student.vocab = teacher.vocab;
    truncate_encoder(teacher.params, teacher.meta.encoder, k_layers, student.params,
                     student.meta.encoder);
    student.meta.encoder.dropout_p = config.dropout;
    Rng rng(Rng::mix(config.seed, 0x57ad17ULL));
    init_projection_params(student.params, student.meta.domains, student.meta.encoder.d_h, rng,
                           student.meta.has_shared);
    const int d2 = 2 * student.meta.encoder.d_h;
    student.params.add(crf_names::kWeight, ops::xavier_uniform_init({d2, kNumLabels}, rng));
    student.params.add(crf_names::kBias, Tensor({kNumLabels}));
    student.params.add(crf_names::kTrans, Tensor({kNumLabels, kNumLabels}));

    return run_training(std::move(student), corpora, config, &teacher);
}

TrainedModel train_single_criteria(const LabeledCorpus& corpus, const EncoderShape& shape,
                                   const TrainConfig& config) {
    check_corpora({corpus});
    config.validate();
    Vocabulary vocab = build_vocab({corpus});
    EncoderConfig cfg = config_from_shape(shape, config.dropout);
    Model model = Model::create(cfg, {corpus.domain}, /*with_shared=*/false, vocab, config.seed);
    return run_training(std::move(model), {corpus}, config, nullptr);
}

std::vector<double> layer_attention_probe(const Model& model, const LabeledCorpus& corpus,
                                          const TrainConfig& config) {
    config.validate();
    const int L = model.meta.encoder.num_layers;
    if (L < 2)
        throw std::invalid_argument("layer_attention_probe: model must have at least 2 layers");
    if (corpus.sentences.empty())
        throw std::invalid_argument("layer_attention_probe: empty corpus");
    model.domain_index(corpus.domain);

    // Frozen per-layer hidden states for every sentence.
    struct Example {
        std::vector<Tensor> layers;
        std::vector<Label> tags;
    };
    std::vector<Example> examples;
    examples.reserve(corpus.sentences.size());
    const int max_len = model.meta.encoder.max_seq_len;
    for (const TaggedSentence& ts : corpus.sentences) {
        const int len = std::min<int>(static_cast<int>(ts.sentence.chars.size()), max_len);
        if (len == 0) continue;
        std::vector<int> ids = model.vocab.ids_for(ts.sentence.chars.substr(0, static_cast<std::size_t>(len)));
        EncodeOptions opts;
        opts.keep_layer_outputs = true;
        EncodeResult enc = encode(model.params, model.meta.encoder, ids, opts);
        examples.push_back({std::move(enc.layer_outputs),
                            {ts.tags.begin(), ts.tags.begin() + len}});
    }

    // Trainable: mixing logits + copies of this domain's projection stack
    // and the CRF head. Everything else stays frozen.
    ParamStore probe;
    probe.add("probe.mix", Tensor({L}));
    probe.add(proj_names::weight(corpus.domain),
              model.params.at(proj_names::weight(corpus.domain)));
    probe.add(proj_names::bias(corpus.domain), model.params.at(proj_names::bias(corpus.domain)));
    if (model.meta.has_shared) {
        probe.add(proj_names::kSharedWeight, model.params.at(proj_names::kSharedWeight));
        probe.add(proj_names::kSharedBias, model.params.at(proj_names::kSharedBias));
    }
    probe.add(crf_names::kWeight, model.params.at(crf_names::kWeight));
    probe.add(crf_names::kBias, model.params.at(crf_names::kBias));
    probe.add(crf_names::kTrans, model.params.at(crf_names::kTrans));

    AdamConfig acfg;
    acfg.lr = config.lr;
    acfg.weight_decay = config.weight_decay;
    AdamState adam(acfg);

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(Rng::mix(config.seed, 0x9076 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            Tape tape;
            BoundParams bp(tape, probe);
            Var loss;
            for (std::size_t k = start; k < stop; ++k) {
                const Example& ex = examples[order[k]];
                Var mixed = tape.layer_mix(bp["probe.mix"], ex.layers);
                Var hd = tape.add_rowvec(tape.matmul(mixed, bp[proj_names::weight(corpus.domain)]),
                                         bp[proj_names::bias(corpus.domain)]);
                Var hs = hd;
                if (model.meta.has_shared)
                    hs = tape.add_rowvec(tape.matmul(mixed, bp[proj_names::kSharedWeight]),
                                         bp[proj_names::kSharedBias]);
                Var scores = emission_scores(tape, hd, hs, bp[crf_names::kWeight],
                                             bp[crf_names::kBias]);
                Var nll = tape.scale(
                    crf_log_likelihood(tape, scores, bp[crf_names::kTrans], ex.tags), -1.0);
                loss = k == start ? nll : tape.add(loss, nll);
            }
            loss = tape.scale(loss, 1.0 / static_cast<double>(stop - start));
            if (!std::isfinite(tape.value(loss)[0]))
                throw TrainingDiverged("layer_attention_probe diverged", TrainReport{});
            tape.backward(loss);
            adam.step(probe, bp.grads());
        }
    }

    const Tensor& logits = probe.at("probe.mix");
    std::vector<double> weights(static_cast<std::size_t>(L));
    double mx = logits[0];
    for (int l = 1; l < L; ++l) mx = std::max(mx, logits[static_cast<std::size_t>(l)]);
    double z = 0.0;
    for (int l = 0; l < L; ++l) {
        weights[static_cast<std::size_t>(l)] = std::exp(logits[static_cast<std::size_t>(l)] - mx);
        z += weights[static_cast<std::size_t>(l)];
    }
    for (auto& w : weights) w /= z;
    return weights;
}

std::string train_report_to_json(const TrainReport& report) {
    ordered_json j;
    j["initial_loss"] = report.initial_loss;
    j["epoch_loss"] = report.epoch_loss;
    j["domains"] = report.domains;
    ordered_json dev = ordered_json::object();
    for (std::size_t d = 0; d < report.domains.size(); ++d) {
        ordered_json curve = ordered_json::array();
        for (double v : report.dev_f1[d]) {
            if (std::isnan(v))
                curve.push_back(nullptr);
            else
                curve.push_back(v);
        }
        dev[report.domains[d]] = std::move(curve);
    }
    j["dev_f1"] = std::move(dev);
    ordered_json macro = ordered_json::array();
    for (double v : report.dev_f1_macro) {
        if (std::isnan(v))
            macro.push_back(nullptr);
        else
            macro.push_back(v);
    }
    j["dev_f1_macro"] = std::move(macro);
    j["best_epoch"] = report.best_epoch;
    j["best_f1"] = report.best_f1;
    j["epochs_completed"] = report.epochs_completed;
    return j.dump(2) + "\n";
}

}  // namespace mcseg
