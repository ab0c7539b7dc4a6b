import numpy as np
import pytest

from hebert import dchi, inversion as inv
from hebert.errors import DataError


def synth_corpus(rng, n_sentences=400, vocab_size=80, words_per_sentence=6, dim=768):
    """Deterministic corpus whose embeddings are sums of per-token vectors."""
    words = [f"tok{i}" for i in range(vocab_size)]
    word_vecs = rng.normal(size=(vocab_size, dim)) / np.sqrt(dim)
    sentences, embs = [], []
    for _ in range(n_sentences):
        idx = rng.choice(vocab_size, size=words_per_sentence, replace=False)
        sentences.append(" ".join(words[i] for i in idx))
        embs.append(word_vecs[idx].sum(axis=0))
    return sentences, np.array(embs)


PROBE_CFG = dict(learning_rate=2.0, epochs=40, batch_size=64)


class TestProbeTraining:
    def test_memorization_on_disjoint_vocab(self):
        sentences = [f"w{i}a w{i}b w{i}c" for i in range(10)]
        vocab = sorted({w for s in sentences for w in s.split()})
        emb = np.eye(10, 16)
        y = inv.token_targets(sentences, vocab)
        cfg = inv.ProbeConfig(learning_rate=5.0, epochs=200, batch_size=10, rng_seed=0)
        model = inv.train_probe(emb, y, cfg, vocab=vocab)
        f1 = inv.attack_f1(model, emb, [set(s.split()) for s in sentences])
        assert f1 >= 0.95

    def test_noised_strictly_below_plaintext(self):
        rng = np.random.default_rng(41)
        sentences, emb = synth_corpus(rng)
        vocab = inv.build_vocab(sentences, min_freq=2)
        y = inv.token_targets(sentences, vocab)
        split = 320
        cfg = inv.ProbeConfig(rng_seed=0, **PROBE_CFG)
        token_sets = [set(inv.tokenize(s)) for s in sentences]
        plain = inv.train_probe(emb[:split], y[:split], cfg, vocab=vocab)
        f1_plain = inv.attack_f1(plain, emb[split:], token_sets[split:])
        noised = dchi.privatize(emb, dchi.NoiseParams(eta=50.0, dim=emb.shape[1], rng_seed=1))
        noisy = inv.train_probe(noised[:split], y[:split], cfg, vocab=vocab)
        f1_noisy = inv.attack_f1(noisy, noised[split:], token_sets[split:])
        assert f1_noisy < f1_plain

    def test_zero_epochs_is_threshold_only_chance(self):
        rng = np.random.default_rng(42)
        sentences, emb = synth_corpus(rng, n_sentences=50)
        vocab = inv.build_vocab(sentences, min_freq=1)
        y = inv.token_targets(sentences, vocab)
        cfg = inv.ProbeConfig(rng_seed=0, epochs=0)
        model = inv.train_probe(emb, y, cfg, vocab=vocab)
        token_sets = [set(inv.tokenize(s)) for s in sentences]
        got = inv.attack_f1(model, emb, token_sets)
        # untrained model scores sigmoid(0)=0.5 everywhere; at threshold 0.5
        # the threshold-only predictor emits nothing
        assert got == 0.0

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(43)
        sentences, emb = synth_corpus(rng, n_sentences=60)
        vocab = inv.build_vocab(sentences, min_freq=1)
        y = inv.token_targets(sentences, vocab)
        cfg = inv.ProbeConfig(rng_seed=5, epochs=3)
        a = inv.train_probe(emb, y, cfg, vocab=vocab)
        b = inv.train_probe(emb, y, cfg, vocab=vocab)
        assert np.array_equal(a.weights, b.weights)

    def test_empty_vocab_errors(self):
        with pytest.raises(DataError):
            inv.build_vocab(["completely unique words here"], min_freq=2)


class TestAttackF1:
    def test_perfect_predictions(self):
        model = inv.ProbeModel(
            ["a", "b"], np.zeros((2, 2)), np.array([100.0, -100.0]), 0.5
        )
        assert inv.attack_f1(model, np.zeros((2, 2)), [{"a"}, {"a"}]) == 1.0

    def test_no_predictions_above_threshold(self):
        model = inv.ProbeModel(["a", "b"], np.zeros((2, 2)), np.full(2, -100.0), 0.5)
        assert inv.attack_f1(model, np.zeros((3, 2)), [{"a"}, {"b"}, {"a"}]) == 0.0

    def test_hand_computed_micro_f1(self):
        # every row predicts exactly {a} against truths {a,b},{a,d},{c}:
        # TP=2, FP=1, FN=3 -> micro F1 = 2*2/(2*2+1+3) = 0.5
        model = inv.ProbeModel(
            ["a", "b", "c", "d"],
            np.zeros((4, 4)),
            np.array([10.0, -10.0, -10.0, -10.0]),
            0.5,
        )
        truth = [{"a", "b"}, {"a", "d"}, {"c"}]
        f1 = inv.attack_f1(model, np.zeros((3, 4)), truth)
        assert f1 == pytest.approx(2 * 2 / (2 * 2 + 1 + 3))

    def test_micro_f1_confusion_arithmetic(self):
        # the spec's hand case: TP=4, FP=1, FN=2 -> F1 = 8/11
        from hebert.data import f1_from_counts

        assert f1_from_counts(4, 1, 2) == pytest.approx(8 / 11)

    def test_ciphertext_inputs_are_type_error(self, desk, desk_keys):
        from hebert import ckks

        ct = ckks.encrypt_vector(desk, np.zeros(8), desk_keys)
        model = inv.ProbeModel(["a"], np.zeros((8, 1)), np.zeros(1), 0.5)
        with pytest.raises(TypeError, match="plaintext"):
            model.scores(ct)
        with pytest.raises(TypeError):
            inv.train_probe(ct, [{"a"}])


class TestMonotoneRisk:
    def test_f1_nonincreasing_as_eta_decreases(self):
        rng = np.random.default_rng(44)
        sentences, emb = synth_corpus(rng, n_sentences=600)
        vocab = inv.build_vocab(sentences, min_freq=2)
        y = inv.token_targets(sentences, vocab)
        token_sets = [set(inv.tokenize(s)) for s in sentences]
        split = 480
        cfg = inv.ProbeConfig(rng_seed=0, **PROBE_CFG)
        f1s = []
        for eta in (175, 150, 125, 100, 75, 50):
            noised = dchi.privatize(
                emb, dchi.NoiseParams(eta=float(eta), dim=emb.shape[1], rng_seed=2)
            )
            model = inv.train_probe(noised[:split], y[:split], cfg, vocab=vocab)
            f1s.append(inv.attack_f1(model, noised[split:], token_sets[split:]))
        assert all(b <= a + 0.01 for a, b in zip(f1s, f1s[1:])), f1s
        assert f1s[0] > f1s[-1]
