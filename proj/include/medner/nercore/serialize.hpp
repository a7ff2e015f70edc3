#ifndef MEDNER_NERCORE_SERIALIZE_HPP
#define MEDNER_NERCORE_SERIALIZE_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "medner/corpus/corpus.hpp"
#include "medner/nercore/model.hpp"
#include "medner/nercore/train.hpp"
#include "medner/util/error.hpp"

// Model container layout:
//
//   MEDNER-MODEL
//   format_version 1
//   <key> <value>            model dimensions and the training config
//   scheme IOB2
//   type <entity type>       one per type, in tag order
//   min_count <n>
//   word <word>              vocabulary entries after the reserved slots
//   char <char>
//   tensor <name> <rows> <cols> <byte offset> <crc32 hex>
//   END
//   <payload: every tensor as little-endian IEEE-754 binary64, row-major>
namespace medner {

inline constexpr std::string_view kModelMagic = "MEDNER-MODEL";
inline constexpr int kModelFormatVersion = 1;

struct LoadedModel {
    Model model;
    TrainConfig train_config;
    std::string oov_policy;
};

namespace detail {

inline void put_f64(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

inline double get_f64(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}

inline std::uint32_t crc32_of(std::string_view bytes) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

inline std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline std::string serialize_model(const Model& model, const TrainConfig& train = {}) {
    std::ostringstream h;
    const auto& c = model.config;
    h << kModelMagic << "\nformat_version " << kModelFormatVersion << "\n";
    h << "word_dim " << c.word_dim << "\nchar_dim " << c.char_dim << "\nnum_filters " << c.num_filters
      << "\nfilter_width " << c.filter_width << "\nlstm_state " << c.lstm_state << "\nuse_char_cnn "
      << c.use_char_cnn << "\ntrainable_embeddings " << c.trainable_embeddings << "\nuse_transition_mask "
      << c.use_transition_mask << "\n";
    h << "oov_policy " << to_string(model.embeddings ? model.embeddings->policy() : OovPolicy::UnkRow) << "\n";
    h << "learning_rate " << detail::exact(train.learning_rate) << "\nbatch_size " << train.batch_size
      << "\nmax_epochs " << train.max_epochs << "\ndropout " << detail::exact(train.dropout) << "\nbeta1 "
      << detail::exact(train.beta1) << "\nbeta2 " << detail::exact(train.beta2) << "\nepsilon "
      << detail::exact(train.epsilon) << "\nwarmup_steps " << train.warmup_steps << "\npatience " << train.patience
      << "\ngrad_clip_norm " << detail::exact(train.grad_clip_norm) << "\nseed " << train.seed << "\n";
    h << "scheme " << to_string(model.schema.scheme()) << "\n";
    for (const auto& t : model.schema.entity_types()) h << "type " << t << "\n";
    h << "min_count " << model.vocab.min_count() << "\n";
    for (std::size_t i = 2; i < model.vocab.num_words(); ++i) h << "word " << model.vocab.words()[i] << "\n";
    for (std::size_t i = 2; i < model.vocab.num_chars(); ++i) h << "char " << model.vocab.chars()[i] << "\n";

    std::string payload;
    auto tensors = model.params.tensors();
    for (std::size_t k = 0; k < ParamSet::kCount; ++k) {
        const std::size_t offset = payload.size();
        for (double v : tensors[k]->data) detail::put_f64(payload, v);
        char crc[16];
        std::snprintf(crc, sizeof crc, "%08x", detail::crc32_of(std::string_view(payload).substr(offset)));
        h << "tensor " << ParamSet::kNames[k] << " " << tensors[k]->rows << " " << tensors[k]->cols << " " << offset
          << " " << crc << "\n";
    }
    h << "END\n";
    return h.str() + payload;
}

inline void save_model(const Model& model, const std::string& path, const TrainConfig& train = {}) {
    write_file(path, serialize_model(model, train));
}

/// Parses a container. The embedding table is not stored in it and must be
/// supplied; its dimension has to match the recorded word dimension.
inline LoadedModel deserialize_model(std::string_view bytes, std::shared_ptr<const EmbeddingTable> embeddings) {
    const std::string end_marker = "\nEND\n";
    const auto end_pos = bytes.find(end_marker);
    if (bytes.substr(0, kModelMagic.size()) != kModelMagic || end_pos == std::string_view::npos) {
        throw ModelFormatError("not a model container (bad magic or missing END)");
    }
    const std::string_view header = bytes.substr(0, end_pos + 1);
    const std::string_view payload = bytes.substr(end_pos + end_marker.size());

    std::map<std::string, std::string> kv;
    std::vector<std::string> types, words, chars;
    struct Entry {
        std::string name;
        std::size_t rows, cols, offset;
        std::string crc;
    };
    std::vector<Entry> entries;
    std::istringstream in{std::string(header)};
    std::string line;
    std::getline(in, line);  // magic
    while (std::getline(in, line)) {
        auto sp = line.find(' ');
        std::string key = line.substr(0, sp);
        std::string value = sp == std::string::npos ? "" : line.substr(sp + 1);
        if (key == "type") types.push_back(value);
        else if (key == "word") words.push_back(value);
        else if (key == "char") chars.push_back(value);
        else if (key == "tensor") {
            std::istringstream ts(value);
            Entry e;
            if (!(ts >> e.name >> e.rows >> e.cols >> e.offset >> e.crc)) {
                throw ModelFormatError("malformed tensor entry: " + line);
            }
            entries.push_back(e);
        } else {
            kv[key] = value;
        }
    }

    auto get = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw ModelFormatError("manifest lacks '" + k + "'");
        return it->second;
    };
    auto num = [&](const std::string& k) {
        try {
            return static_cast<std::size_t>(std::stoull(get(k)));
        } catch (const std::logic_error&) {
            throw ModelFormatError("manifest value for '" + k + "' is not a number");
        }
    };
    auto real = [&](const std::string& k) {
        try {
            return std::stod(get(k));
        } catch (const std::logic_error&) {
            throw ModelFormatError("manifest value for '" + k + "' is not a number");
        }
    };

    if (get("format_version") != std::to_string(kModelFormatVersion)) {
        throw VersionError("model format version " + get("format_version") + " is not supported (expected " +
                           std::to_string(kModelFormatVersion) + ")");
    }

    LoadedModel out;
    ModelConfig& c = out.model.config;
    c.word_dim = num("word_dim");
    c.char_dim = num("char_dim");
    c.num_filters = num("num_filters");
    c.filter_width = num("filter_width");
    c.lstm_state = num("lstm_state");
    c.use_char_cnn = num("use_char_cnn") != 0;
    c.trainable_embeddings = num("trainable_embeddings") != 0;
    c.use_transition_mask = num("use_transition_mask") != 0;
    out.oov_policy = get("oov_policy");

    TrainConfig& t = out.train_config;
    t.learning_rate = real("learning_rate");
    t.batch_size = num("batch_size");
    t.max_epochs = num("max_epochs");
    t.dropout = real("dropout");
    t.beta1 = real("beta1");
    t.beta2 = real("beta2");
    t.epsilon = real("epsilon");
    t.warmup_steps = num("warmup_steps");
    t.patience = num("patience");
    t.grad_clip_norm = real("grad_clip_norm");
    t.seed = num("seed");

    try {
        out.model.schema = LabelSchema(types, parse_scheme(get("scheme")));
        out.model.vocab = Vocabulary(words, chars, num("min_count"));
    } catch (const ModelFormatError&) {
        throw;
    } catch (const Error& e) {
        throw ModelFormatError(std::string("bad schema or vocabulary in manifest: ") + e.what());
    }

    if (!embeddings) throw ValidationError("loading a model requires an embedding table");
    if (embeddings->dimension() != c.word_dim) {
        throw ShapeError("model expects " + std::to_string(c.word_dim) + "-dimensional word vectors, table has " +
                         std::to_string(embeddings->dimension()));
    }
    out.model.embeddings = std::move(embeddings);

    // Expected shapes follow from the dimensions alone.
    const std::size_t s = c.lstm_state, width = c.input_dim(), tags = out.model.schema.num_tags();
    const std::size_t dc = c.use_char_cnn ? c.char_dim : 0, nf = c.char_features();
    const std::array<std::pair<std::size_t, std::size_t>, ParamSet::kCount> expected = {{
        {c.use_char_cnn ? out.model.vocab.num_chars() : 0, dc},
        {nf, c.use_char_cnn ? c.filter_width * dc : 0},
        {1, nf},
        {4 * s, width},
        {4 * s, s},
        {1, 4 * s},
        {4 * s, width},
        {4 * s, s},
        {1, 4 * s},
        {tags, 2 * s},
        {1, tags},
        {tags + 2, tags + 2},
        {c.trainable_embeddings ? out.model.vocab.num_words() : 0, c.trainable_embeddings ? c.word_dim : 0},
    }};
    if (entries.size() != ParamSet::kCount) {
        throw ShapeError("expected " + std::to_string(ParamSet::kCount) + " tensors, manifest lists " +
                         std::to_string(entries.size()));
    }
    auto tensors = out.model.params.tensors();
    const auto* raw = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t k = 0; k < ParamSet::kCount; ++k) {
        const Entry& e = entries[k];
        if (e.name != ParamSet::kNames[k]) {
            throw ShapeError("tensor " + std::to_string(k) + " is '" + e.name + "', expected '" +
                             std::string(ParamSet::kNames[k]) + "'");
        }
        if (e.rows != expected[k].first || e.cols != expected[k].second) {
            throw ShapeError("tensor " + e.name + " is " + std::to_string(e.rows) + "x" + std::to_string(e.cols) +
                             " but the manifest dimensions require " + std::to_string(expected[k].first) + "x" +
                             std::to_string(expected[k].second));
        }
        const std::size_t nbytes = e.rows * e.cols * 8;
        if (e.offset > payload.size() || payload.size() - e.offset < nbytes) {
            throw ChecksumError("tensor " + e.name + " is truncated");
        }
        char crc[16];
        std::snprintf(crc, sizeof crc, "%08x", detail::crc32_of(payload.substr(e.offset, nbytes)));
        if (e.crc != crc) throw ChecksumError("checksum mismatch in tensor " + e.name);
        Matrix m(e.rows, e.cols);
        for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = detail::get_f64(raw + e.offset + 8 * i);
        *tensors[k] = std::move(m);
    }
    return out;
}

struct ModelManifestInfo {
    std::size_t word_dim = 0;
    std::string oov_policy;
};

/// Reads the word dimension and OOV policy from a container's manifest, which
/// is enough to load the matching embedding table.
inline ModelManifestInfo peek_model(std::string_view bytes) {
    const auto end_pos = bytes.find("\nEND\n");
    if (bytes.substr(0, kModelMagic.size()) != kModelMagic || end_pos == std::string_view::npos) {
        throw ModelFormatError("not a model container (bad magic or missing END)");
    }
    ModelManifestInfo info;
    std::istringstream in{std::string(bytes.substr(0, end_pos))};
    std::string key, value;
    while (in >> key && std::getline(in, value)) {
        if (!value.empty() && value[0] == ' ') value.erase(0, 1);
        if (key == "word_dim") {
            try {
                info.word_dim = std::stoul(value);
            } catch (const std::logic_error&) {
                throw ModelFormatError("manifest value for 'word_dim' is not a number");
            }
        } else if (key == "oov_policy") {
            info.oov_policy = value;
        }
    }
    if (info.word_dim == 0 || info.oov_policy.empty()) throw ModelFormatError("manifest lacks word_dim or oov_policy");
    return info;
}

inline LoadedModel load_model(const std::string& path, std::shared_ptr<const EmbeddingTable> embeddings) {
    return deserialize_model(read_file(path), std::move(embeddings));
}

}  // namespace medner

#endif  // MEDNER_NERCORE_SERIALIZE_HPP
