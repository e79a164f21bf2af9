"""Smoke test for the python bindings: drives the full pipeline on the toy
corpus and checks the pieces agree with each other."""

import os
import sys
import tempfile

import medtag as mt


def main(toy_path):
    docs = mt.parse_pubtator_file(toy_path)
    assert len(docs) == 40, len(docs)

    scheme = mt.LabelScheme.from_corpus(docs)
    assert mt.UNKNOWN_TYPE in scheme.types
    assert len(scheme.iob_tags()) == 2 * len(scheme.types) + 1

    docs = mt.resolve_labels(docs, scheme)
    docs, warnings = mt.resolve_overlaps(docs)
    assert not warnings, warnings

    stats = mt.corpus_stats(docs)
    assert stats.num_documents == 40, stats.num_documents
    assert stats.num_entities == 80, stats.num_entities
    assert sum(stats.entities_per_type.values()) == stats.num_entities

    seqs = [mt.document_to_sequence(d) for d in docs]
    assert all(len(s.tokens) == len(s.tags) for s in seqs)

    text = mt.word_tokenize("Heart rate was 120 bpm.")
    assert [t.surface for t in text.tokens] == ["Heart", "rate", "was", "120", "bpm", "."]
    assert mt.normalize_numbers(text.normalized)[3] == "NUM"
    assert mt.normalize_numbers(["dose", "2.5"]) == ["dose", "NUM"]

    vocab = mt.SubwordVocab.from_pieces(["[PAD]", "[UNK]", "a", "b", "##a", "##b"])
    assert mt.wordpiece_tokenize("ab", vocab) == ["a", "##b"]
    alignment = mt.tokenize_words(["ab", "ba"], vocab)
    piece_tags = mt.align_labels(["B-x", "O"], alignment)
    assert piece_tags == ["B-x", mt.PADDING_TAG, "O", mt.PADDING_TAG]
    assert mt.collapse_predictions(piece_tags, alignment) == ["B-x", "O"]

    config = mt.TaggerConfig()
    config.kind = mt.ModelKind.recurrent_crf
    config.recurrent.word_dim = 8
    config.recurrent.char_dim = 4
    config.recurrent.char_hidden = 4
    config.recurrent.hidden = 8
    config.recurrent.layers = 1

    train_set = seqs[:8]
    tagger = mt.build_tagger(config, scheme, train_set, seed=5)
    options = mt.default_train_options(mt.ModelKind.recurrent_crf)
    options.optim.peak_lr = 0.01
    options.optim.batch_size = 4
    options.optim.epochs = 3
    options.seed = 5
    result = mt.train(tagger, train_set, train_set, options)
    assert len(result.epochs) == 3
    assert result.epochs[-1].train_loss < result.epochs[0].train_loss
    assert result.total_steps == 6, result.total_steps

    preds = mt.predict_dataset(tagger, train_set)
    scores = mt.strict_score([s.tags for s in train_set], preds)
    assert 0.0 <= scores.overall.f1() <= 1.0
    assert scores.overall.tp + scores.overall.fn == sum(
        len(mt.decode_entities(s.tags)) for s in train_set
    )

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.ckpt")
        mt.save_checkpoint(tagger, path)
        back = mt.load_checkpoint(path)
        for s in train_set:
            assert mt.predict_tags(back, s.tokens) == mt.predict_tags(tagger, s.tokens)

        conll = os.path.join(tmp, "out.conll")
        mt.write_conll_file(conll, [mt.ConllSequence(s.tokens, p) for s, p in zip(train_set, preds)])
        rows = mt.read_conll_file(conll)
        assert [r.tags for r in rows] == preds

    errors = mt.classify_errors([["B-a", "O", "O"]], [["O", "O", "B-a"]])
    assert errors.complete_false_positive == 1
    assert errors.complete_false_negative == 1
    assert errors.total() == 2

    assert mt.lr_schedule(0, 100, 0.01) == 0.0
    assert abs(mt.lr_schedule(10, 100, 0.01) - 0.01) < 1e-15

    print("python bindings smoke test passed")


if __name__ == "__main__":
    main(sys.argv[1])
