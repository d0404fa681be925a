import numpy as np
import pytest
import torch

from aggdetect.corpus import Label, Split
from aggdetect.features import Scheme, encode_word_index, fit_vocabulary
from aggdetect.models import (
    GateLstmCell,
    LstmState,
    LstmParams,
    ModelHandle,
    ModelKind,
    ModelSpec,
    TrainingError,
    autoencoder_pretrain,
    build_classifier,
    load_checkpoint,
    lstm_step,
    predict,
    save_checkpoint,
    train,
)

from conftest import synthetic_corpus

TINY_HP = dict(
    embedding_dim=16,
    hidden_size=16,
    batch_size=16,
    epochs=3,
    max_len=20,
    dropout=0.0,
)


def tiny_spec(kind=ModelKind.LSTM, **overrides):
    return ModelSpec(kind, {**TINY_HP, **overrides})


class TestGateLstmCell:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_numpy_reference(self, seed):
        rng = np.random.default_rng(seed)
        params = LstmParams.random(3, 4, rng)
        cell = GateLstmCell(3, 4).double()
        cell.load_numpy_params(params)
        x = rng.normal(size=(2, 3))
        h = rng.normal(size=(2, 4))
        c = rng.normal(size=(2, 4))
        with torch.no_grad():
            h_t, c_t = cell(
                torch.as_tensor(x), torch.as_tensor(h), torch.as_tensor(c)
            )
        ref = lstm_step(x, LstmState(h, c), params)
        np.testing.assert_allclose(h_t.numpy(), ref.h, atol=1e-12)
        np.testing.assert_allclose(c_t.numpy(), ref.c, atol=1e-12)

    def test_gradcheck_against_finite_differences(self):
        torch.manual_seed(0)
        cell = GateLstmCell(2, 2).double()
        x = torch.randn(1, 2, dtype=torch.double, requires_grad=True)
        h = torch.randn(1, 2, dtype=torch.double, requires_grad=True)
        c = torch.randn(1, 2, dtype=torch.double, requires_grad=True)
        assert torch.autograd.gradcheck(
            lambda *a: torch.stack(cell(*a)).sum(), (x, h, c), eps=1e-6, atol=1e-4
        )

    def test_classifier_loss_gradient_finite_differences(self):
        # end-to-end: CE loss of a tiny double-precision classifier vs FD
        from aggdetect.models.networks import LstmClassifier

        torch.manual_seed(1)
        model = LstmClassifier(
            vocab_size=6, embedding_dim=2, hidden_size=2, dropout=0.0
        ).double()
        ids = torch.tensor([[2, 3, 4], [5, 2, 0]])
        mask = torch.tensor([[1, 1, 1], [1, 1, 0]])
        y = torch.tensor([0, 2])
        loss_fn = torch.nn.CrossEntropyLoss()

        def loss_value():
            return loss_fn(model(ids, mask), y)

        loss_value().backward()
        param = model.cell.W_f
        eps = 1e-6
        for idx in [(0, 0), (1, 2)]:
            analytic = param.grad[idx].item()
            with torch.no_grad():
                param[idx] += eps
                hi = loss_value().item()
                param[idx] -= 2 * eps
                lo = loss_value().item()
                param[idx] += eps
            assert abs(analytic - (hi - lo) / (2 * eps)) < 1e-5


class TestBuildAndPredict:
    def test_build_shapes(self):
        corpus = synthetic_corpus(per_label=5)
        handle = build_classifier(tiny_spec(), train_corpus=corpus, seed=0)
        batch = handle.encode([c.text for c in corpus][:4])
        probs, labels = predict(handle, batch)
        assert probs.shape == (4, 3)
        assert len(labels) == 4

    def test_softmax_rows_sum_to_one(self):
        corpus = synthetic_corpus(per_label=5)
        for kind in (ModelKind.LSTM, ModelKind.BILSTM, ModelKind.LSTM_AUTOENCODER):
            handle = build_classifier(tiny_spec(kind), train_corpus=corpus, seed=0)
            probs, _ = predict(handle, handle.encode([c.text for c in corpus][:6]))
            np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
            assert (probs >= 0).all()

    def test_tie_break_prefers_nag(self):
        corpus = synthetic_corpus(per_label=3)
        handle = build_classifier(tiny_spec(), train_corpus=corpus, seed=0)
        # zero the head so every class gets an identical logit
        with torch.no_grad():
            handle.module.head.weight.zero_()
            handle.module.head.bias.zero_()
        probs, labels = predict(handle, handle.encode(["hello world"]))
        np.testing.assert_allclose(probs[0], [1 / 3] * 3, atol=1e-9)
        assert labels == [Label.NAG]

    def test_empty_batch(self):
        corpus = synthetic_corpus(per_label=3)
        handle = build_classifier(tiny_spec(), train_corpus=corpus, seed=0)
        probs, labels = predict(handle, handle.encode([]))
        assert probs.shape == (0, 3)
        assert labels == []

    def test_scheme_mismatch_rejected(self, tiny_bert_checkpoint):
        corpus = synthetic_corpus(per_label=3)
        handle = build_classifier(tiny_spec(), train_corpus=corpus, seed=0)
        batch = encode_word_index(["x"], handle.vocab, 5)
        object.__setattr__(batch, "scheme", Scheme.TRANSFORMER_SUBWORD)
        with pytest.raises(TrainingError, match="scheme"):
            predict(handle, batch)

    def test_word2vec_classifier_uses_skipgram_embeddings(self):
        corpus = synthetic_corpus(per_label=10, seed=2)
        spec = tiny_spec(
            ModelKind.WORD2VEC_CLASSIFIER,
            skipgram_epochs=1, skipgram_window=2, skipgram_negatives=2,
        )
        handle = build_classifier(spec, train_corpus=corpus, seed=0)
        from aggdetect.models.skipgram import skipgram_train

        result = skipgram_train(
            corpus, dim=16, window=2, negatives=2, epochs=1, seed=0,
            vocab=handle.vocab,
        )
        emb = handle.module.embedding.weight.detach().numpy()
        np.testing.assert_allclose(emb, result.embeddings.vectors, atol=1e-6)


class TestTrain:
    def test_determinism(self):
        train_c = synthetic_corpus(per_label=8, seed=1)
        val_c = synthetic_corpus(per_label=3, seed=2, split=Split.TESTING)
        runs = []
        for _ in range(2):
            handle = build_classifier(tiny_spec(epochs=2), train_corpus=train_c, seed=5)
            runs.append(train(handle, train_c, val_c, seed=5))
        assert runs[0].train_loss == runs[1].train_loss
        assert runs[0].val_loss == runs[1].val_loss
        assert runs[0].val_accuracy == runs[1].val_accuracy
        assert runs[0].best_epoch == runs[1].best_epoch

    def test_zero_learning_rate_freezes_accuracy(self):
        train_c = synthetic_corpus(per_label=8, seed=3)
        val_c = synthetic_corpus(per_label=3, seed=4, split=Split.TESTING)
        handle = build_classifier(
            tiny_spec(learning_rate=0.0, epochs=3, patience=99),
            train_corpus=train_c, seed=0,
        )
        run = train(handle, train_c, val_c, seed=0)
        assert len(set(run.val_accuracy)) == 1
        assert len(set(np.round(run.val_loss, 12))) == 1

    def test_memorizes_small_corpus(self):
        corpus = synthetic_corpus(per_label=10, seed=6)
        handle = build_classifier(
            tiny_spec(epochs=30, learning_rate=5e-3, patience=30),
            train_corpus=corpus, seed=0,
        )
        run = train(handle, corpus, corpus, seed=0)
        _, labels = predict(handle, handle.encode([c.text for c in corpus]))
        correct = sum(p == c.label for p, c in zip(labels, corpus))
        assert correct / len(corpus) >= 0.9
        assert run.train_loss[-1] < run.train_loss[0]

    def test_empty_corpus_rejected(self):
        corpus = synthetic_corpus(per_label=3)
        handle = build_classifier(tiny_spec(), train_corpus=corpus, seed=0)
        from aggdetect.corpus import Corpus, Language

        empty = Corpus((), Split.TRAINING, Language.EN)
        with pytest.raises(TrainingError, match="non-empty"):
            train(handle, empty, corpus)


class TestAutoencoder:
    def test_overfits_one_sentence(self):
        corpus = synthetic_corpus(per_label=1, seed=7)
        one = corpus.with_comments(corpus.comments[:1])
        spec = tiny_spec(
            ModelKind.LSTM_AUTOENCODER,
            pretrain_epochs=200, learning_rate=1e-2, max_len=12,
        )
        result = autoencoder_pretrain(one, spec, seed=0)
        assert result.reconstruction_accuracy(one, max_len=12) == 1.0
        assert result.loss_curve[-1] < result.loss_curve[0]

    def test_untrained_accuracy_near_chance(self):
        corpus = synthetic_corpus(per_label=5, seed=8)
        spec = tiny_spec(ModelKind.LSTM_AUTOENCODER, pretrain_epochs=0)
        result = autoencoder_pretrain(corpus, spec, seed=0)
        # ~1/vocab chance of hitting the right token without training
        assert result.reconstruction_accuracy(corpus, max_len=20) < 0.3

    def test_wrong_kind_rejected(self):
        corpus = synthetic_corpus(per_label=3)
        with pytest.raises(TrainingError, match="lstm_autoencoder"):
            autoencoder_pretrain(corpus, tiny_spec(ModelKind.LSTM))

    def test_frozen_encoder_keeps_weights(self):
        corpus = synthetic_corpus(per_label=6, seed=9)
        spec = tiny_spec(ModelKind.LSTM_AUTOENCODER, freeze_encoder=True, epochs=2)
        handle = build_classifier(spec, train_corpus=corpus, seed=0)
        before = handle.module.autoencoder.encoder.W_f.detach().clone()
        train(handle, corpus, corpus, seed=0)
        assert torch.equal(handle.module.autoencoder.encoder.W_f, before)


class TestCheckpoints:
    @pytest.mark.parametrize(
        "kind",
        [ModelKind.LSTM, ModelKind.BILSTM, ModelKind.LSTM_AUTOENCODER,
         ModelKind.WORD2VEC_CLASSIFIER],
    )
    def test_round_trip_identical_probabilities(self, kind, tmp_path):
        corpus = synthetic_corpus(per_label=6, seed=10)
        spec = tiny_spec(
            kind, epochs=1, skipgram_epochs=1, skipgram_window=2,
            skipgram_negatives=2,
        )
        handle = build_classifier(spec, train_corpus=corpus, seed=0)
        run = train(handle, corpus, corpus, seed=0)
        save_checkpoint(handle, run, tmp_path / "run")
        restored = load_checkpoint(tmp_path / "run")
        texts = [c.text for c in corpus]
        p_before, _ = predict(handle, handle.encode(texts))
        p_after, _ = predict(restored, restored.encode(texts))
        np.testing.assert_allclose(p_after, p_before, atol=1e-6)

    def test_run_manifest_written(self, tmp_path):
        import json

        corpus = synthetic_corpus(per_label=4, seed=11)
        handle = build_classifier(tiny_spec(epochs=1), train_corpus=corpus, seed=0)
        run = train(handle, corpus, corpus, seed=0)
        save_checkpoint(handle, run, tmp_path / "run")
        manifest = json.loads((tmp_path / "run" / "run.json").read_text())
        assert manifest["spec"]["kind"] == "lstm"
        assert manifest["seed"] == 0
        assert len(manifest["train_loss"]) == run.epochs_trained
