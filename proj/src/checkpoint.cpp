#include "sevscore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "sevscore/errors.hpp"
#include "sevscore/losses.hpp"

namespace sevscore {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'V', 'C'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("checkpoint: truncated stream");
    return v;
}

void write_doubles(std::ostream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), std::streamsize(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), std::streamsize(n * sizeof(double)));
    if (!in) throw DataError("checkpoint: truncated stream");
}

void write_model(std::ostream& out, const ScoringModel& m) {
    write_pod<std::uint32_t>(out, std::uint32_t(m.layer_dims().size()));
    for (std::size_t d : m.layer_dims()) write_pod<std::uint64_t>(out, d);
    write_pod<std::uint8_t>(out, std::uint8_t(m.hidden_activation()));
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        write_doubles(out, m.weights()[l].data.data(), m.weights()[l].size());
        write_doubles(out, m.biases()[l].data(), m.biases()[l].size());
    }
}

ScoringModel read_model(std::istream& in) {
    const auto n_dims = read_pod<std::uint32_t>(in);
    if (n_dims < 2 || n_dims > 64) throw DataError("checkpoint: implausible layer count");
    std::vector<std::size_t> dims(n_dims);
    for (auto& d : dims) d = std::size_t(read_pod<std::uint64_t>(in));
    const auto act = read_pod<std::uint8_t>(in);
    if (act > std::uint8_t(Activation::Identity))
        throw DataError("checkpoint: unknown activation id");
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix w(dims[l + 1], dims[l]);
        read_doubles(in, w.data.data(), w.size());
        weights.push_back(std::move(w));
        std::vector<double> b(dims[l + 1]);
        read_doubles(in, b.data(), b.size());
        biases.push_back(std::move(b));
    }
    return ScoringModel::from_parameters(std::move(dims), std::move(weights),
                                         std::move(biases), Activation(act));
}

void write_adam(std::ostream& out, const AdamState& st) {
    write_pod<std::uint64_t>(out, st.step);
    write_pod<double>(out, st.learning_rate);
    write_pod<double>(out, st.beta1);
    write_pod<double>(out, st.beta2);
    write_pod<double>(out, st.epsilon_num);
    for (std::size_t l = 0; l < st.m_weights.size(); ++l) {
        write_doubles(out, st.m_weights[l].data.data(), st.m_weights[l].size());
        write_doubles(out, st.v_weights[l].data.data(), st.v_weights[l].size());
        write_doubles(out, st.m_biases[l].data(), st.m_biases[l].size());
        write_doubles(out, st.v_biases[l].data(), st.v_biases[l].size());
    }
}

AdamState read_adam(std::istream& in, const ScoringModel& model) {
    AdamState st = make_adam_state(model);
    st.step = read_pod<std::uint64_t>(in);
    st.learning_rate = read_pod<double>(in);
    st.beta1 = read_pod<double>(in);
    st.beta2 = read_pod<double>(in);
    st.epsilon_num = read_pod<double>(in);
    for (std::size_t l = 0; l < st.m_weights.size(); ++l) {
        read_doubles(in, st.m_weights[l].data.data(), st.m_weights[l].size());
        read_doubles(in, st.v_weights[l].data.data(), st.v_weights[l].size());
        read_doubles(in, st.m_biases[l].data(), st.m_biases[l].size());
        read_doubles(in, st.v_biases[l].data(), st.v_biases[l].size());
    }
    return st;
}

}  // namespace

std::string to_string(ScoreTransform t) {
    switch (t) {
        case ScoreTransform::Identity: return "identity";
        case ScoreTransform::Sigmoid: return "sigmoid";
        case ScoreTransform::Sum: return "sum";
        case ScoreTransform::SumSigmoid: return "sum_sigmoid";
    }
    return "?";
}

ScoreTransform score_transform_from_string(const std::string& s) {
    if (s == "identity") return ScoreTransform::Identity;
    if (s == "sigmoid") return ScoreTransform::Sigmoid;
    if (s == "sum") return ScoreTransform::Sum;
    if (s == "sum_sigmoid") return ScoreTransform::SumSigmoid;
    throw ConfigError("unknown score transform: " + s);
}

double Checkpoint::score(std::span<const double> x) const {
    switch (transform) {
        case ScoreTransform::Identity:
            return forward(models.front(), x);
        case ScoreTransform::Sigmoid:
            return sigmoid(forward(models.front(), x));
        case ScoreTransform::Sum: {
            double acc = 0.0;
            for (const ScoringModel& m : models) acc += forward(m, x);
            return acc;
        }
        case ScoreTransform::SumSigmoid: {
            double acc = 0.0;
            for (const ScoringModel& m : models) acc += sigmoid(forward(m, x));
            return acc;
        }
    }
    throw NumericError("checkpoint: invalid transform");
}

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
    if (ckpt.models.empty()) throw DataError("checkpoint: no models to save");
    if (!ckpt.adam.empty() && ckpt.adam.size() != ckpt.models.size())
        throw DataError("checkpoint: adam state count does not match model count");
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint8_t>(out, std::uint8_t(ckpt.transform));
    write_pod<std::uint32_t>(out, std::uint32_t(ckpt.models.size()));
    for (const ScoringModel& m : ckpt.models) write_model(out, m);
    write_pod<std::uint8_t>(out, ckpt.has_adam() ? 1 : 0);
    for (const AdamState& st : ckpt.adam) write_adam(out, st);
    write_pod<std::uint64_t>(out, ckpt.train_batch);
    if (!out) throw DataError("checkpoint: write failed");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    save_checkpoint(ckpt, out);
}

Checkpoint load_checkpoint(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint: bad magic bytes (not a checkpoint file?)");
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion)
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    Checkpoint ckpt;
    const auto transform = read_pod<std::uint8_t>(in);
    if (transform > std::uint8_t(ScoreTransform::SumSigmoid))
        throw DataError("checkpoint: unknown score transform id");
    ckpt.transform = ScoreTransform(transform);
    const auto n_models = read_pod<std::uint32_t>(in);
    if (n_models == 0 || n_models > 1024)
        throw DataError("checkpoint: implausible model count");
    for (std::uint32_t i = 0; i < n_models; ++i) ckpt.models.push_back(read_model(in));
    const auto has_adam = read_pod<std::uint8_t>(in);
    if (has_adam)
        for (std::uint32_t i = 0; i < n_models; ++i)
            ckpt.adam.push_back(read_adam(in, ckpt.models[i]));
    ckpt.train_batch = read_pod<std::uint64_t>(in);
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint file " + path.string());
    return load_checkpoint(in);
}

}  // namespace sevscore
