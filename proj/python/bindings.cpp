// Python bindings for the tagging toolkit: corpus ingestion, tokenization,
// model training, prediction, and evaluation. Mutating C++ helpers that take
// containers are wrapped functionally, since container arguments cross the
// boundary by copy.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "medtag/corpus.hpp"
#include "medtag/eval.hpp"
#include "medtag/optim.hpp"
#include "medtag/pipeline.hpp"
#include "medtag/tokenization.hpp"
#include "medtag/training.hpp"

namespace py = pybind11;
using namespace medtag;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Span-based entity tagging for clinical and biomedical text";
  m.attr("__version__") = "0.1.0";
  m.attr("PADDING_TAG") = kPaddingTag;
  m.attr("UNKNOWN_TYPE") = kUnknownType;

  // -- tokenization ---------------------------------------------------------

  py::class_<Token>(m, "Token")
      .def(py::init<>())
      .def_readwrite("surface", &Token::surface)
      .def_readwrite("start_char", &Token::start_char)
      .def_readwrite("end_char", &Token::end_char)
      .def("__repr__", [](const Token& t) {
        return "Token('" + t.surface + "', " + std::to_string(t.start_char) + ", " +
               std::to_string(t.end_char) + ")";
      });

  py::class_<TokenizedText>(m, "TokenizedText")
      .def_readonly("tokens", &TokenizedText::tokens)
      .def_readonly("normalized", &TokenizedText::normalized);

  m.def("word_tokenize", &word_tokenize, py::arg("text"),
        "Whitespace split with punctuation peeling; offsets index the input.");
  m.def("is_numeric_token", &is_numeric_token, py::arg("token"));
  m.def(
      "normalize_numbers",
      [](std::vector<std::string> tokens) { return normalize_numbers(tokens); },
      py::arg("tokens"), "Replaces numeric tokens with 'NUM'.");

  py::class_<SubwordVocab>(m, "SubwordVocab")
      .def(py::init<>())
      .def_static("load_file", &SubwordVocab::load_file, py::arg("path"))
      .def_static("from_pieces", &SubwordVocab::from_pieces, py::arg("pieces"))
      .def_readonly("pieces", &SubwordVocab::pieces)
      .def_readonly("continuation_marker", &SubwordVocab::continuation_marker)
      .def_readonly("unk_token", &SubwordVocab::unk_token)
      .def("id", &SubwordVocab::id, py::arg("piece"))
      .def("has", &SubwordVocab::has, py::arg("piece"))
      .def("__len__", &SubwordVocab::size);

  m.def("wordpiece_tokenize", &wordpiece_tokenize, py::arg("word"), py::arg("vocab"),
        "Greedy longest-match decomposition into subword pieces.");

  py::class_<PieceAlignment>(m, "PieceAlignment")
      .def_readonly("pieces", &PieceAlignment::pieces)
      .def_readonly("word_index", &PieceAlignment::word_index)
      .def_readonly("is_first_piece", &PieceAlignment::is_first_piece)
      .def("num_words", &PieceAlignment::num_words)
      .def("piece_ids", &PieceAlignment::piece_ids, py::arg("vocab"))
      .def("first_piece_positions", &PieceAlignment::first_piece_positions);

  m.def("tokenize_words", &tokenize_words, py::arg("words"), py::arg("vocab"));
  m.def("align_labels", &align_labels, py::arg("word_tags"), py::arg("alignment"),
        "First piece keeps the word tag; continuations get the padding tag.");
  m.def("collapse_predictions", &collapse_predictions, py::arg("piece_tags"), py::arg("alignment"),
        "Inverse of align_labels: word tag = first piece's tag.");
  m.def("split_by_piece_budget", &split_by_piece_budget, py::arg("words"), py::arg("vocab"),
        py::arg("max_pieces"));

  // -- corpus ---------------------------------------------------------------

  py::class_<Mention>(m, "Mention")
      .def(py::init<>())
      .def_readwrite("start_char", &Mention::start_char)
      .def_readwrite("end_char", &Mention::end_char)
      .def_readwrite("surface", &Mention::surface)
      .def_readwrite("raw_types", &Mention::raw_types)
      .def_readwrite("resolved_type", &Mention::resolved_type)
      .def_readwrite("concept_id", &Mention::concept_id);

  py::class_<Document>(m, "Document")
      .def(py::init<>())
      .def_readwrite("doc_id", &Document::doc_id)
      .def_readwrite("text", &Document::text)
      .def_readwrite("mentions", &Document::mentions);

  py::class_<LabelScheme>(m, "LabelScheme")
      .def(py::init<>())
      .def_static("from_types", &LabelScheme::from_types, py::arg("types"))
      .def_static("from_corpus", &LabelScheme::from_corpus, py::arg("docs"))
      .def_static("i2b2", &LabelScheme::i2b2)
      .def_readonly("types", &LabelScheme::types)
      .def("has_type", &LabelScheme::has_type, py::arg("type"))
      .def("type_index", &LabelScheme::type_index, py::arg("type"))
      .def("iob_tags", &LabelScheme::iob_tags);

  m.def("parse_pubtator_file", &parse_pubtator_file, py::arg("path"));

  py::class_<I2b2Options>(m, "I2b2Options")
      .def(py::init<>())
      .def_readwrite("tokens_zero_based", &I2b2Options::tokens_zero_based);

  m.def(
      "parse_i2b2_files",
      [](const std::string& note_path, const std::string& concept_path, const I2b2Options& opts) {
        std::vector<std::string> warnings;
        Document doc = parse_i2b2_files(note_path, concept_path, opts, &warnings);
        return py::make_tuple(std::move(doc), std::move(warnings));
      },
      py::arg("note_path"), py::arg("concept_path"), py::arg("options") = I2b2Options(),
      "Returns (document, warnings).");

  m.def(
      "resolve_labels",
      [](std::vector<Document> docs, const LabelScheme& scheme) {
        resolve_labels(docs, scheme);
        return docs;
      },
      py::arg("docs"), py::arg("scheme"),
      "Returns documents with each mention's first listed type resolved.");
  m.def(
      "resolve_overlaps",
      [](std::vector<Document> docs) {
        std::vector<std::string> warnings;
        resolve_overlaps(docs, &warnings);
        return py::make_tuple(std::move(docs), std::move(warnings));
      },
      py::arg("docs"), "Returns (documents with disjoint mentions, warnings).");
  m.def(
      "document_to_sequence",
      [](const Document& doc) { return document_to_sequence(doc); }, py::arg("doc"),
      "Tokenizes, NUM-normalizes, and projects mentions to IOB tags.");

  py::class_<LabeledSequence>(m, "LabeledSequence")
      .def(py::init<>())
      .def_readwrite("doc_id", &LabeledSequence::doc_id)
      .def_readwrite("tokens", &LabeledSequence::tokens)
      .def_readwrite("raw_tokens", &LabeledSequence::raw_tokens)
      .def_readwrite("tags", &LabeledSequence::tags);

  py::class_<CorpusStats>(m, "CorpusStats")
      .def_readonly("num_documents", &CorpusStats::num_documents)
      .def_readonly("num_tokens", &CorpusStats::num_tokens)
      .def_readonly("num_entities", &CorpusStats::num_entities)
      .def_readonly("num_types", &CorpusStats::num_types)
      .def_readonly("entities_per_type", &CorpusStats::entities_per_type);

  m.def("corpus_stats", &corpus_stats, py::arg("docs"));

  // -- CoNLL rows -----------------------------------------------------------

  py::class_<ConllSequence>(m, "ConllSequence")
      .def(py::init<>())
      .def(py::init([](std::vector<std::string> tokens, std::vector<std::string> tags) {
             return ConllSequence{std::move(tokens), std::move(tags)};
           }),
           py::arg("tokens"), py::arg("tags"))
      .def_readwrite("tokens", &ConllSequence::tokens)
      .def_readwrite("tags", &ConllSequence::tags);

  m.def("read_conll_file", &read_conll_file, py::arg("path"));
  m.def("write_conll_file", &write_conll_file, py::arg("path"), py::arg("sequences"));
  m.def("sequences_from_conll", &sequences_from_conll, py::arg("rows"));
  m.def("sequences_to_conll", &sequences_to_conll, py::arg("sequences"));

  // -- evaluation -----------------------------------------------------------

  py::class_<EntitySpan>(m, "EntitySpan")
      .def(py::init<>())
      .def_readwrite("start", &EntitySpan::start)
      .def_readwrite("end", &EntitySpan::end)
      .def_readwrite("type", &EntitySpan::type)
      .def("__eq__", [](const EntitySpan& a, const EntitySpan& b) { return a == b; })
      .def("__repr__", [](const EntitySpan& s) {
        return "EntitySpan(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ", '" +
               s.type + "')";
      });

  m.def("decode_entities", &decode_entities, py::arg("tags"));

  py::class_<TagCounts>(m, "TagCounts")
      .def_readonly("tp", &TagCounts::tp)
      .def_readonly("fp", &TagCounts::fp)
      .def_readonly("fn", &TagCounts::fn)
      .def("precision", &TagCounts::precision)
      .def("recall", &TagCounts::recall)
      .def("f1", &TagCounts::f1);

  py::class_<Scores>(m, "Scores")
      .def_readonly("overall", &Scores::overall)
      .def_readonly("per_type", &Scores::per_type);

  m.def("strict_score", &strict_score, py::arg("gold"), py::arg("pred"),
        "Entity-level micro scores; span and type must both match.");

  py::class_<ErrorBreakdown>(m, "ErrorBreakdown")
      .def_readonly("right_span_wrong_label", &ErrorBreakdown::right_span_wrong_label)
      .def_readonly("right_label_overlapping_span", &ErrorBreakdown::right_label_overlapping_span)
      .def_readonly("wrong_label_overlapping_span", &ErrorBreakdown::wrong_label_overlapping_span)
      .def_readonly("complete_false_positive", &ErrorBreakdown::complete_false_positive)
      .def_readonly("complete_false_negative", &ErrorBreakdown::complete_false_negative)
      .def("total", &ErrorBreakdown::total);

  m.def("classify_errors", &classify_errors, py::arg("gold"), py::arg("pred"));

  py::class_<ModelComparison>(m, "ModelComparison")
      .def_readonly("first", &ModelComparison::first)
      .def_readonly("second", &ModelComparison::second)
      .def_readonly("first_errors", &ModelComparison::first_errors)
      .def_readonly("second_errors", &ModelComparison::second_errors)
      .def_readonly("f1_delta", &ModelComparison::f1_delta);

  m.def("compare_models", &compare_models, py::arg("gold"), py::arg("pred_first"),
        py::arg("pred_second"));

  // -- model configuration --------------------------------------------------

  py::enum_<ModelKind>(m, "ModelKind")
      .value("recurrent_crf", ModelKind::recurrent_crf)
      .value("encoder_linear", ModelKind::encoder_linear)
      .value("encoder_recurrent", ModelKind::encoder_recurrent)
      .value("dual_encoder", ModelKind::dual_encoder);

  py::class_<RecurrentConfig>(m, "RecurrentConfig")
      .def(py::init<>())
      .def_readwrite("word_dim", &RecurrentConfig::word_dim)
      .def_readwrite("char_dim", &RecurrentConfig::char_dim)
      .def_readwrite("char_hidden", &RecurrentConfig::char_hidden)
      .def_readwrite("hidden", &RecurrentConfig::hidden)
      .def_readwrite("layers", &RecurrentConfig::layers)
      .def_readwrite("dropout", &RecurrentConfig::dropout);

  py::class_<TransformerConfig>(m, "TransformerConfig")
      .def(py::init<>())
      .def_readwrite("layers", &TransformerConfig::layers)
      .def_readwrite("dim", &TransformerConfig::dim)
      .def_readwrite("heads", &TransformerConfig::heads)
      .def_readwrite("ff_dim", &TransformerConfig::ff_dim)
      .def_readwrite("max_positions", &TransformerConfig::max_positions)
      .def_readwrite("dropout", &TransformerConfig::dropout)
      .def_readwrite("vocab_size", &TransformerConfig::vocab_size);

  py::class_<TaggerConfig>(m, "TaggerConfig")
      .def(py::init<>())
      .def_readwrite("kind", &TaggerConfig::kind)
      .def_readwrite("recurrent", &TaggerConfig::recurrent)
      .def_readwrite("encoder", &TaggerConfig::encoder)
      .def_readwrite("second_encoder", &TaggerConfig::second_encoder);

  py::class_<Tagger>(m, "Tagger")
      .def_readonly("config", &Tagger::config)
      .def_readonly("scheme", &Tagger::scheme)
      .def_readonly("seed", &Tagger::seed);

  m.def("build_tagger", &build_tagger, py::arg("config"), py::arg("scheme"), py::arg("train"),
        py::arg("seed"), py::arg("subwords") = SubwordVocab(),
        py::arg("second_subwords") = SubwordVocab(),
        "Builds vocabularies from the training data and initializes parameters.");

  m.def(
      "predict_tags",
      [](const Tagger& tagger, const std::vector<std::string>& words) {
        return predict_tags(tagger, words);
      },
      py::arg("tagger"), py::arg("words"));
  m.def(
      "predict_dataset",
      [](const Tagger& tagger, const std::vector<LabeledSequence>& data) {
        return predict_tags(tagger, data);
      },
      py::arg("tagger"), py::arg("data"));

  // -- training -------------------------------------------------------------

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("beta1", &OptimizerConfig::beta1)
      .def_readwrite("beta2", &OptimizerConfig::beta2)
      .def_readwrite("weight_decay", &OptimizerConfig::weight_decay)
      .def_readwrite("dropout_prob", &OptimizerConfig::dropout_prob)
      .def_readwrite("peak_lr", &OptimizerConfig::peak_lr)
      .def_readwrite("batch_size", &OptimizerConfig::batch_size)
      .def_readwrite("epochs", &OptimizerConfig::epochs)
      .def_readwrite("warmup_fraction", &OptimizerConfig::warmup_fraction)
      .def_readwrite("epsilon", &OptimizerConfig::epsilon);

  py::enum_<LrPolicy>(m, "LrPolicy")
      .value("constant", LrPolicy::constant)
      .value("warmup_linear", LrPolicy::warmup_linear);

  py::class_<TrainOptions>(m, "TrainOptions")
      .def(py::init<>())
      .def_readwrite("optim", &TrainOptions::optim)
      .def_readwrite("lr_policy", &TrainOptions::lr_policy)
      .def_readwrite("clip_norm", &TrainOptions::clip_norm)
      .def_readwrite("seed", &TrainOptions::seed)
      .def_readwrite("log_path", &TrainOptions::log_path)
      .def_readwrite("checkpoint_path", &TrainOptions::checkpoint_path);

  m.def("default_train_options", &default_train_options, py::arg("kind"));
  m.def("lr_schedule", &lr_schedule, py::arg("step"), py::arg("total_steps"), py::arg("peak_lr"),
        py::arg("warmup_fraction") = 0.10,
        "Linear warmup to the peak, then linear decay to zero.");

  py::class_<EpochLog>(m, "EpochLog")
      .def_readonly("epoch", &EpochLog::epoch)
      .def_readonly("train_loss", &EpochLog::train_loss)
      .def_readonly("dev_precision", &EpochLog::dev_precision)
      .def_readonly("dev_recall", &EpochLog::dev_recall)
      .def_readonly("dev_f1", &EpochLog::dev_f1)
      .def_readonly("has_dev", &EpochLog::has_dev)
      .def_readonly("last_lr", &EpochLog::last_lr)
      .def_readonly("steps_done", &EpochLog::steps_done);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("epochs", &TrainResult::epochs)
      .def_readonly("total_steps", &TrainResult::total_steps)
      .def_readonly("best_epoch", &TrainResult::best_epoch)
      .def_readonly("best_dev_f1", &TrainResult::best_dev_f1)
      .def_readonly("final_train_loss", &TrainResult::final_train_loss);

  m.def("train", &train, py::arg("tagger"), py::arg("train_data"), py::arg("dev_data"),
        py::arg("options"), "Optimizes the tagger in place and returns per-epoch history.");

  m.def("save_checkpoint", &save_checkpoint, py::arg("tagger"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  // -- cross-validation -----------------------------------------------------

  py::class_<GridPoint>(m, "GridPoint")
      .def(py::init<>())
      .def_readwrite("batch_size", &GridPoint::batch_size)
      .def_readwrite("lr", &GridPoint::lr)
      .def_readwrite("epochs", &GridPoint::epochs)
      .def("__repr__", [](const GridPoint& g) {
        return "GridPoint(batch_size=" + std::to_string(g.batch_size) +
               ", lr=" + std::to_string(g.lr) + ", epochs=" + std::to_string(g.epochs) + ")";
      });

  py::class_<CvOptions>(m, "CvOptions")
      .def(py::init<>())
      .def_readwrite("folds", &CvOptions::folds)
      .def_readwrite("batch_sizes", &CvOptions::batch_sizes)
      .def_readwrite("lrs", &CvOptions::lrs)
      .def_readwrite("max_epochs", &CvOptions::max_epochs)
      .def_readwrite("seed", &CvOptions::seed)
      .def_readwrite("train_template", &CvOptions::train_template);

  py::class_<CvCell>(m, "CvCell")
      .def_readonly("point", &CvCell::point)
      .def_readonly("mean_f1", &CvCell::mean_f1)
      .def_readonly("fold_f1", &CvCell::fold_f1);

  py::class_<CvResult>(m, "CvResult")
      .def_readonly("best", &CvResult::best)
      .def_readonly("best_mean_f1", &CvResult::best_mean_f1)
      .def_readonly("table", &CvResult::table)
      .def_readonly("fold_documents", &CvResult::fold_documents);

  m.def("kfold_cv", &kfold_cv, py::arg("config"), py::arg("scheme"), py::arg("documents"),
        py::arg("options"), py::arg("subwords") = SubwordVocab(),
        py::arg("second_subwords") = SubwordVocab(),
        "Whole-document folds; one run per batch/rate/fold covers every epoch budget.");
}
