#include "sevscore/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sevscore/errors.hpp"
#include "sevscore/metrics.hpp"

namespace sevscore {

using nlohmann::json;

std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::Comparator: return "comparator";
        case LossKind::CrossEntropy: return "cross_entropy";
        case LossKind::Contrastive: return "contrastive";
        case LossKind::Nrrank: return "nrrank";
    }
    return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "comparator") return LossKind::Comparator;
    if (s == "cross_entropy") return LossKind::CrossEntropy;
    if (s == "contrastive") return LossKind::Contrastive;
    if (s == "nrrank") return LossKind::Nrrank;
    throw ConfigError("unknown loss kind: " + s);
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void TrainConfig::validate(const Dataset& dataset) const {
    if (name.empty()) throw ConfigError("train config: name must not be empty");
    if (channels.empty()) throw ConfigError("train config: at least one channel required");
    if (epsilon <= 0.0) throw ConfigError("train config: epsilon must be positive");
    if (contrastive_margin <= 0.0)
        throw ConfigError("train config: contrastive_margin must be positive");
    if (total_batches < 1) throw ConfigError("train config: total_batches must be >= 1");
    if (batch_size < 2) throw ConfigError("train config: batch_size must be >= 2");
    if (eval_interval < 1) throw ConfigError("train config: eval_interval must be >= 1");
    if (sampler != "uniform" && sampler != "subject_stratified")
        throw ConfigError("train config: unknown sampler '" + sampler + "'");
    if (subject_pair_fraction < 0.0 || subject_pair_fraction > 1.0)
        throw ConfigError("train config: subject_pair_fraction must lie in [0,1]");
    if (optimizer.learning_rate <= 0.0)
        throw ConfigError("train config: learning_rate must be positive");

    std::set<std::string> seen;
    for (const std::string& ch : channels) {
        if (!seen.insert(ch).second)
            throw ConfigError("train config: duplicate channel '" + ch + "'");
        if (ch == "chronology") continue;
        if (!dataset.find_ordering(ch))
            throw ConfigError("train config: dataset has no ordering named '" + ch + "'");
    }
    for (const std::string& d : chronology_restrict)
        if (d != "HC" && d != "MND")
            throw ConfigError("train config: chronology_restrict entries must be HC or MND");

    const auto single_channel_of_kind = [&](OrderingKind kind, const char* what) {
        if (channels.size() != 1 || channels[0] == "chronology")
            throw ConfigError(std::string("train config: ") + to_string(loss) +
                              " requires exactly one " + what + " channel");
        const OrderingSystem* o = dataset.find_ordering(channels[0]);
        if (!o || o->kind != kind)
            throw ConfigError(std::string("train config: ") + to_string(loss) +
                              " requires a " + what + " channel, got '" + channels[0] + "'");
        return o;
    };
    if (loss == LossKind::CrossEntropy || loss == LossKind::Contrastive) {
        single_channel_of_kind(OrderingKind::Diagnosis, "diagnosis");
    } else if (loss == LossKind::Nrrank) {
        const OrderingSystem* o =
            single_channel_of_kind(OrderingKind::IntegerScale, "integer_scale");
        if (!o->min_value || !o->max_value)
            throw ConfigError("train config: nrrank channel needs a declared value range");
    }
}

namespace {

TrainConfig config_from_json(const json& j) {
    TrainConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "name") cfg.name = value.get<std::string>();
            else if (key == "loss") cfg.loss = loss_kind_from_string(value.get<std::string>());
            else if (key == "channels") cfg.channels = value.get<std::vector<std::string>>();
            else if (key == "epsilon") cfg.epsilon = value.get<double>();
            else if (key == "contrastive_margin") cfg.contrastive_margin = value.get<double>();
            else if (key == "nrrank_mode") {
                const std::string m = value.get<std::string>();
                if (m == "mse") cfg.nrrank_mode = NrrankMode::Mse;
                else if (m == "relative_entropy") cfg.nrrank_mode = NrrankMode::RelativeEntropy;
                else throw ConfigError("train config: nrrank_mode must be 'mse' or 'relative_entropy'");
            }
            else if (key == "total_batches") cfg.total_batches = value.get<std::size_t>();
            else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
            else if (key == "eval_interval") cfg.eval_interval = value.get<std::size_t>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "hidden_dims") cfg.hidden_dims = value.get<std::vector<std::size_t>>();
            else if (key == "learning_rate") cfg.optimizer.learning_rate = value.get<double>();
            else if (key == "beta1") cfg.optimizer.beta1 = value.get<double>();
            else if (key == "beta2") cfg.optimizer.beta2 = value.get<double>();
            else if (key == "adam_epsilon") cfg.optimizer.epsilon = value.get<double>();
            else if (key == "sampler") cfg.sampler = value.get<std::string>();
            else if (key == "subject_pair_fraction")
                cfg.subject_pair_fraction = value.get<double>();
            else if (key == "chronology_restrict")
                cfg.chronology_restrict = value.get<std::vector<std::string>>();
            else throw ConfigError("train config: unknown field '" + key + "'");
        } catch (const json::exception&) {
            throw ConfigError("train config: field '" + key + "' has the wrong type");
        }
    }
    return cfg;
}

}  // namespace

TrainConfig TrainConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("train config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("train config: top-level object expected");
    return config_from_json(j);
}

TrainConfig TrainConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string TrainConfig::to_json_text() const {
    json j{{"name", name},
           {"loss", to_string(loss)},
           {"channels", channels},
           {"epsilon", epsilon},
           {"contrastive_margin", contrastive_margin},
           {"nrrank_mode", nrrank_mode == NrrankMode::Mse ? "mse" : "relative_entropy"},
           {"total_batches", total_batches},
           {"batch_size", batch_size},
           {"eval_interval", eval_interval},
           {"seed", seed},
           {"hidden_dims", hidden_dims},
           {"learning_rate", optimizer.learning_rate},
           {"beta1", optimizer.beta1},
           {"beta2", optimizer.beta2},
           {"adam_epsilon", optimizer.epsilon},
           {"sampler", sampler},
           {"subject_pair_fraction", subject_pair_fraction},
           {"chronology_restrict", chronology_restrict}};
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

void RunManifest::save(const std::filesystem::path& path) const {
    json j{{"version", 1},
           {"name", name},
           {"dataset_path", dataset_path},
           {"config", json::parse(config_json)},
           {"best", {{"batch", best_batch},
                     {"val_accuracy", best_val_accuracy},
                     {"checkpoint", best_checkpoint}}}};
    j["history"] = json::array();
    for (const EvalPoint& p : history) {
        j["history"].push_back(json{{"batch", p.batch},
                                    {"train_loss", p.train_loss},
                                    {"train_loss_per_pair", p.train_loss_per_pair},
                                    {"val_accuracy", p.val_accuracy},
                                    {"improved", p.improved},
                                    {"checkpoint", p.checkpoint}});
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("manifest " + path.string() + ": invalid JSON: " + e.what());
    }
    RunManifest m;
    m.name = j.at("name").get<std::string>();
    m.dataset_path = j.at("dataset_path").get<std::string>();
    m.config_json = j.at("config").dump();
    m.best_batch = j.at("best").at("batch").get<std::size_t>();
    m.best_val_accuracy = j.at("best").at("val_accuracy").get<double>();
    m.best_checkpoint = j.at("best").at("checkpoint").get<std::string>();
    for (const json& pj : j.at("history")) {
        EvalPoint p;
        p.batch = pj.at("batch").get<std::size_t>();
        p.train_loss = pj.at("train_loss").get<double>();
        p.train_loss_per_pair = pj.at("train_loss_per_pair").get<double>();
        p.val_accuracy = pj.at("val_accuracy").get<double>();
        p.improved = pj.at("improved").get<bool>();
        p.checkpoint = pj.at("checkpoint").get<std::string>();
        m.history.push_back(std::move(p));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Channel construction
// ---------------------------------------------------------------------------

std::vector<LabelChannel> build_channels(const TrainConfig& cfg, const Dataset& dataset) {
    std::vector<LabelChannel> out;
    for (const std::string& name : cfg.channels) {
        if (name == "chronology") {
            std::set<Diagnosis> restrict_to;
            for (const std::string& d : cfg.chronology_restrict)
                restrict_to.insert(d == "MND" ? Diagnosis::MND : Diagnosis::HC);
            std::vector<double> times(dataset.samples.size());
            std::vector<bool> eligible(dataset.samples.size());
            for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
                times[i] = dataset.samples[i].time_days;
                const Subject& subj =
                    dataset.subjects[std::size_t(dataset.subject_of_sample[i])];
                eligible[i] = restrict_to.count(subj.diagnosis) > 0;
            }
            OrderingSystem ord;
            ord.name = "chronology";
            ord.kind = OrderingKind::Chronology;
            ord.direction = Direction::HigherIsMoreSevere;
            out.push_back(chronology_channel(dataset.subject_of_sample, times,
                                             eligible, std::move(ord)));
        } else {
            const OrderingSystem* ord = dataset.find_ordering(name);
            if (!ord) throw ConfigError("no ordering named '" + name + "'");
            out.push_back(normalize_channel(dataset.raw_channel(name), *ord));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

std::vector<double> score_samples(const std::vector<ScoringModel>& models,
                                  ScoreTransform transform, const Dataset& dataset,
                                  std::span<const std::size_t> sample_indices) {
    Checkpoint view;
    view.models = models;  // cheap enough for the model sizes in play
    view.transform = transform;
    std::vector<double> scores(sample_indices.size());
    for (std::size_t k = 0; k < sample_indices.size(); ++k)
        scores[k] = view.score(dataset.samples[sample_indices[k]].features);
    return scores;
}

namespace {

struct NrrankSetup {
    std::size_t num_classes = 0;
    std::int64_t normalized_min = 0;  // class_index = normalized - normalized_min
};

NrrankSetup nrrank_setup(const OrderingSystem& ord) {
    NrrankSetup s;
    const std::int64_t lo = *ord.min_value;
    const std::int64_t hi = *ord.max_value;
    s.num_classes = std::size_t(hi - lo + 1);
    s.normalized_min = ord.direction == Direction::LowerIsMoreSevere ? -hi : lo;
    return s;
}

std::string checkpoint_name(std::size_t batch) {
    std::string n = std::to_string(batch);
    while (n.size() < 6) n.insert(n.begin(), '0');
    return "checkpoints/ckpt_" + n + ".bin";
}

ScoreTransform transform_for(const TrainConfig& cfg) {
    switch (cfg.loss) {
        case LossKind::Comparator:
        case LossKind::Contrastive: return ScoreTransform::Identity;
        case LossKind::CrossEntropy: return ScoreTransform::Sigmoid;
        case LossKind::Nrrank:
            return cfg.nrrank_mode == NrrankMode::Mse ? ScoreTransform::Sum
                                                      : ScoreTransform::SumSigmoid;
    }
    throw ConfigError("invalid loss kind");
}

}  // namespace

RunManifest run_training(const TrainConfig& cfg, const Dataset& dataset,
                         const std::string& dataset_path,
                         const std::filesystem::path& run_dir, bool resume,
                         bool verbose) {
    cfg.validate(dataset);

    const std::vector<std::size_t> val_indices = dataset.split_indices(Split::Validation);
    if (dataset.split_indices(Split::Train).empty() || val_indices.empty())
        throw DataError("dataset has no train/validation split assigned");

    std::filesystem::create_directories(run_dir / "checkpoints");

    const std::vector<LabelChannel> channels = build_channels(cfg, dataset);
    const std::vector<int> diagnosis = dataset.diagnosis_labels();

    // Model bank: one scorer for most losses, K cumulative heads for nrrank.
    NrrankSetup nr;
    std::size_t n_models = 1;
    if (cfg.loss == LossKind::Nrrank) {
        nr = nrrank_setup(*dataset.find_ordering(cfg.channels[0]));
        n_models = nr.num_classes;
    }
    std::vector<std::size_t> dims{dataset.feature_dim};
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(1);

    std::vector<ScoringModel> models;
    std::vector<AdamState> adam;
    for (std::size_t k = 0; k < n_models; ++k) {
        models.emplace_back(dims, cfg.seed + k);
        adam.push_back(make_adam_state(models.back(), cfg.optimizer.learning_rate,
                                       cfg.optimizer.beta1, cfg.optimizer.beta2,
                                       cfg.optimizer.epsilon));
    }
    const ScoreTransform transform = transform_for(cfg);

    RunManifest manifest;
    manifest.name = cfg.name;
    manifest.dataset_path = dataset_path;
    manifest.config_json = cfg.to_json_text();

    auto sampler = make_sampler(cfg.sampler, dataset, Split::Train, cfg.batch_size,
                                cfg.seed, cfg.subject_pair_fraction);

    std::size_t start_batch = 0;
    if (resume) {
        const RunManifest previous = RunManifest::load(run_dir / "manifest.json");
        if (previous.config_json != manifest.config_json)
            throw ConfigError("resume: config does not match the original run");
        const EvalPoint* last_saved = nullptr;
        for (const EvalPoint& p : previous.history)
            if (p.improved) last_saved = &p;
        if (last_saved) {
            Checkpoint ckpt = load_checkpoint(run_dir / last_saved->checkpoint);
            if (ckpt.models.size() != n_models || !ckpt.has_adam())
                throw DataError("resume: checkpoint does not match the configured model");
            models = std::move(ckpt.models);
            adam = std::move(ckpt.adam);
            start_batch = ckpt.train_batch;
            sampler->skip(start_batch);
            for (const EvalPoint& p : previous.history) {
                if (p.batch > start_batch) break;
                manifest.history.push_back(p);
                if (p.improved) {
                    manifest.best_batch = p.batch;
                    manifest.best_val_accuracy = p.val_accuracy;
                    manifest.best_checkpoint = p.checkpoint;
                }
            }
        }
    }

    std::vector<GradientTape> tapes;
    for (const ScoringModel& m : models) tapes.push_back(make_tape(m));

    const ComparatorConfig comparator_cfg{cfg.epsilon};
    double loss_accum = 0.0, per_pair_accum = 0.0;
    std::size_t accum_count = 0;

    std::vector<ForwardCache> caches(cfg.batch_size);
    std::vector<double> scores(cfg.batch_size);

    for (std::size_t batch = start_batch + 1; batch <= cfg.total_batches; ++batch) {
        const std::vector<std::size_t> batch_indices = sampler->next_batch();

        double batch_loss = 0.0;
        double batch_loss_per_pair = 0.0;
        for (GradientTape& t : tapes) t.zero();

        if (cfg.loss == LossKind::Nrrank) {
            // Head k regresses position k of the cumulative target vector.
            const LabelChannel& ch = channels[0];
            std::vector<std::vector<ForwardCache>> head_caches(
                n_models, std::vector<ForwardCache>(cfg.batch_size));
            std::size_t n_present = 0;
            std::vector<std::vector<double>> upstream(n_models,
                                                      std::vector<double>(cfg.batch_size, 0.0));
            for (std::size_t i = 0; i < batch_indices.size(); ++i) {
                const std::size_t idx = batch_indices[i];
                if (ch.values[idx].missing) continue;
                ++n_present;
                std::vector<double> preds(n_models);
                for (std::size_t k = 0; k < n_models; ++k)
                    preds[k] = forward_cached(models[k], dataset.samples[idx].features,
                                              head_caches[k][i]);
                const std::size_t class_index =
                    std::size_t(ch.values[idx].value - nr.normalized_min);
                const VectorLoss vl =
                    nrrank_loss(preds, class_index, nr.num_classes, cfg.nrrank_mode);
                batch_loss += vl.loss;
                for (std::size_t k = 0; k < n_models; ++k) upstream[k][i] = vl.grads[k];
            }
            if (n_present > 0) {
                batch_loss /= double(n_present);
                const double inv = 1.0 / double(n_present);
                for (std::size_t k = 0; k < n_models; ++k)
                    for (std::size_t i = 0; i < batch_indices.size(); ++i)
                        if (upstream[k][i] != 0.0)
                            backward_into(models[k], head_caches[k][i], upstream[k][i] * inv,
                                          tapes[k]);
            }
        } else {
            for (std::size_t i = 0; i < batch_indices.size(); ++i)
                scores[i] = forward_cached(models[0],
                                           dataset.samples[batch_indices[i]].features,
                                           caches[i]);
            std::vector<double> upstream(cfg.batch_size, 0.0);

            if (cfg.loss == LossKind::Comparator) {
                std::vector<ChannelBatch> batches;
                batches.reserve(channels.size());
                for (const LabelChannel& ch : channels)
                    batches.push_back(ch.gather(batch_indices));
                const MultiChannelLossResult res =
                    multi_ordering_loss(std::span<const double>(scores.data(), batch_indices.size()),
                                        batches, comparator_cfg);
                batch_loss = res.loss;
                upstream = res.score_grads;
                std::size_t distinct = 0;
                for (const BatchLossResult& c : res.per_channel)
                    distinct += c.distinct_order_pairs;
                batch_loss_per_pair = distinct ? batch_loss / double(distinct) : 0.0;
            } else if (cfg.loss == LossKind::CrossEntropy) {
                std::size_t n = 0;
                for (std::size_t i = 0; i < batch_indices.size(); ++i) {
                    const ScalarLoss sl =
                        cross_entropy_loss(scores[i], diagnosis[batch_indices[i]] == 1);
                    batch_loss += sl.loss;
                    upstream[i] = sl.grad;
                    ++n;
                }
                batch_loss /= double(n);
                for (double& u : upstream) u /= double(n);
            } else {  // Contrastive
                for (std::size_t i = 0; i + 1 < batch_indices.size(); ++i) {
                    for (std::size_t j = i + 1; j < batch_indices.size(); ++j) {
                        const bool same =
                            diagnosis[batch_indices[i]] == diagnosis[batch_indices[j]];
                        const PairLoss pl = contrastive_pair_loss(
                            scores[i], scores[j], same, cfg.contrastive_margin);
                        batch_loss += pl.loss;
                        upstream[i] += pl.grad_a;
                        upstream[j] += pl.grad_b;
                    }
                }
            }

            for (std::size_t i = 0; i < batch_indices.size(); ++i)
                if (upstream[i] != 0.0)
                    backward_into(models[0], caches[i], upstream[i], tapes[0]);
        }

        if (!std::isfinite(batch_loss))
            throw NumericError("non-finite training loss at batch " + std::to_string(batch));

        try {
            for (std::size_t k = 0; k < models.size(); ++k)
                adam_step(models[k], tapes[k], adam[k]);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at batch " + std::to_string(batch));
        }

        loss_accum += batch_loss;
        per_pair_accum += batch_loss_per_pair;
        ++accum_count;

        if (batch % cfg.eval_interval == 0 || batch == cfg.total_batches) {
            const std::vector<double> val_scores =
                score_samples(models, transform, dataset, val_indices);
            std::vector<int> val_labels(val_indices.size());
            for (std::size_t k = 0; k < val_indices.size(); ++k)
                val_labels[k] = diagnosis[val_indices[k]];
            // Early-stopping threshold is fitted on the validation scores
            // themselves; the test-time oracle threshold is fitted later on
            // test and is a different number.
            const ThresholdResult val = oracle_threshold_accuracy(val_scores, val_labels);

            EvalPoint point;
            point.batch = batch;
            point.train_loss = accum_count ? loss_accum / double(accum_count) : 0.0;
            point.train_loss_per_pair =
                accum_count ? per_pair_accum / double(accum_count) : 0.0;
            point.val_accuracy = val.accuracy;
            point.improved = val.accuracy > manifest.best_val_accuracy;
            if (point.improved) {
                point.checkpoint = checkpoint_name(batch);
                Checkpoint ckpt;
                ckpt.models = models;
                ckpt.adam = adam;
                ckpt.train_batch = batch;
                ckpt.transform = transform;
                save_checkpoint(ckpt, run_dir / point.checkpoint);
                manifest.best_batch = batch;
                manifest.best_val_accuracy = val.accuracy;
                manifest.best_checkpoint = point.checkpoint;
            }
            manifest.history.push_back(point);
            manifest.save(run_dir / "manifest.json");
            if (verbose)
                std::cout << "batch " << batch << "  loss " << point.train_loss
                          << "  loss/pair " << point.train_loss_per_pair << "  val_acc "
                          << val.accuracy << (point.improved ? "  (saved)" : "") << "\n";

            loss_accum = per_pair_accum = 0.0;
            accum_count = 0;
        }
    }

    if (manifest.best_checkpoint.empty())
        throw NumericError("training never produced a validation evaluation");
    manifest.save(run_dir / "manifest.json");
    return manifest;
}

}  // namespace sevscore
