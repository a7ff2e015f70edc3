#ifndef MEDNER_MEDNER_HPP
#define MEDNER_MEDNER_HPP

#include "medner/chunking.hpp"
#include "medner/corpus/corpus.hpp"
#include "medner/corpus/schema.hpp"
#include "medner/corpus/split.hpp"
#include "medner/corpus/text.hpp"
#include "medner/corpus/vocab.hpp"
#include "medner/deid.hpp"
#include "medner/embeddings.hpp"
#include "medner/eval.hpp"
#include "medner/nercore/crf.hpp"
#include "medner/nercore/model.hpp"
#include "medner/nercore/serialize.hpp"
#include "medner/nercore/train.hpp"

#endif  // MEDNER_MEDNER_HPP
