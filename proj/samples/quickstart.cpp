// Library walk-through: train on the toy drug/dosage corpus, score the held-out
// file, tag free text and mask the result.
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

#include "medner/medner.hpp"

namespace {

std::string data(const std::string& name) { return std::string(MEDNER_SAMPLE_DATA) + "/" + name; }

medner::Corpus read_tagged(const std::string& name, const medner::LabelSchema& schema) {
    medner::ParseOptions opts;
    opts.schema = schema;
    return medner::parse_conll(medner::read_file(data(name)), opts);
}

}  // namespace

int main() {
    using namespace medner;
    const auto schema = LabelSchema::parse(read_file(data("schema.txt")));
    const Corpus train = read_tagged("train.tsv", schema);
    const Corpus val = read_tagged("val.tsv", schema);
    const Corpus test = read_tagged("test.tsv", schema);

    auto table = std::make_shared<const EmbeddingTable>(load_embeddings(data("embeddings.txt"), 16, OovPolicy::UnkRow));
    ModelConfig mc;
    mc.char_dim = 8;
    mc.num_filters = 8;
    mc.filter_width = 3;
    mc.lstm_state = 16;
    TrainConfig tc;
    tc.learning_rate = 0.01;
    tc.batch_size = 10;
    tc.warmup_steps = 20;
    tc.max_epochs = 30;
    tc.patience = 4;

    auto model = Model::create(mc, schema, build_vocab(train), table, tc.seed);
    auto result = fit(std::move(model), train, val, tc, [](const EpochRecord& r) {
        std::printf("epoch %2zu  loss %9.3f  val micro-F1 %.4f\n", r.epoch, r.train_loss, r.val_micro_f1);
    });

    const auto report = evaluate_corpora(test, predict_corpus(result.model, test));
    std::cout << "\nheld-out report (best epoch " << result.best_epoch << ")\n" << format_report(report);

    const Corpus notes = corpus_from_text(read_file(data("notes.txt")), "notes");
    const Matrix trans = decoding_transitions(result.model);
    std::vector<Chunk> chunks;
    for (const auto& s : notes.sentences) {
        auto p = predict_with(result.model, trans, s);
        for (auto& c : decode_chunks(s, result.model.schema.tags_of(p.tags), p.confidence)) chunks.push_back(c);
    }
    std::cout << "\n" << write_chunk_records(chunks);

    DeidPolicy policy;
    policy.protect("Drug", DeidMode::Mask);
    std::cout << "\n" << apply_policy(notes.documents.front().text, chunks, policy).text;
    return 0;
}
