import json

import numpy as np
import pytest

from relbootstrap.metrics import evaluate
from relbootstrap.probe import (
    PooledSummary,
    TokenEmbeddings,
    TrainConfig,
    TrainingError,
    embed_markup,
    ensemble_per_relation,
    load_model,
    loss_and_gradients,
    pool,
    pooled_dimension,
    predict,
    predict_batch,
    save_model,
    train,
)
from relbootstrap.providers import HashEmbeddingStub

rng_global = np.random.default_rng(20240811)


def _token_embeddings(d: int = 2, length: int = 8) -> TokenEmbeddings:
    vecs = rng_global.standard_normal((length, d))
    return TokenEmbeddings(
        vectors=vecs, cls_index=0, e1_open=1, e1_close=3, e2_open=5, e2_close=7,
    )


# -- pooling ------------------------------------------------------------------

@pytest.mark.parametrize("scheme,factor", [
    ("cls", 1), ("es", 2), ("en", 2), ("cls_es", 3), ("cls_en", 3),
])
def test_pool_dimensions(scheme, factor):
    d = 5
    emb = _token_embeddings(d=d, length=9)
    summary = pool(emb, scheme)
    assert summary.vector.shape == (factor * d,)
    assert pooled_dimension(scheme, d) == factor * d


def test_en_two_vector_mean():
    vecs = np.zeros((6, 2))
    vecs[0] = [1.0, 1.0]   # CLS
    vecs[1] = [2.0, 2.0]   # [E1]
    vecs[2] = [4.0, 4.0]   # [/E1]
    vecs[3] = [9.0, 9.0]
    vecs[4] = [3.0, 3.0]   # [E2]
    vecs[5] = [5.0, 5.0]   # [/E2]
    emb = TokenEmbeddings(vecs, cls_index=0, e1_open=1, e1_close=2, e2_open=4, e2_close=5)
    summary = pool(emb, "en")
    assert np.allclose(summary.vector[:2], [3.0, 3.0])
    assert np.allclose(summary.vector[2:], [4.0, 4.0])


def test_cls_es_concatenation_order():
    emb = _token_embeddings(d=3)
    v = emb.vectors
    summary = pool(emb, "cls_es")
    assert np.array_equal(summary.vector[:3], v[0])
    assert np.array_equal(summary.vector[3:6], v[1])
    assert np.array_equal(summary.vector[6:], v[5])


def test_en_invariant_to_out_of_span_perturbation():
    emb = _token_embeddings(d=4, length=10)
    before = pool(emb, "en").vector.copy()
    perturbed = emb.vectors.copy()
    perturbed[4] += 100.0  # between the spans
    perturbed[8] -= 50.0   # after both spans
    emb2 = TokenEmbeddings(perturbed, emb.cls_index, emb.e1_open, emb.e1_close,
                           emb.e2_open, emb.e2_close)
    assert np.array_equal(pool(emb2, "en").vector, before)


def test_marker_validation():
    vecs = np.zeros((4, 2))
    with pytest.raises(ValueError, match="open < close"):
        TokenEmbeddings(vecs, cls_index=0, e1_open=2, e1_close=1, e2_open=2, e2_close=3)
    with pytest.raises(ValueError, match="out of range"):
        TokenEmbeddings(vecs, cls_index=0, e1_open=1, e1_close=2, e2_open=3, e2_close=9)
    with pytest.raises(ValueError, match="finite"):
        TokenEmbeddings(np.full((4, 2), np.nan), 0, 1, 2, 2, 3)


def test_embed_markup_locates_markers():
    stub = HashEmbeddingStub(dimension=8)
    rendered = "[CLS] alpha [E1] beta [/E1] gamma [E2] delta epsilon [/E2] [SEP]"
    emb = embed_markup(rendered, stub)
    tokens = rendered.split()
    assert emb.cls_index == 0
    assert tokens[emb.e1_open] == "[E1]" and tokens[emb.e1_close] == "[/E1]"
    assert tokens[emb.e2_open] == "[E2]" and tokens[emb.e2_close] == "[/E2]"
    assert emb.vectors.shape == (len(tokens), 8)


def test_embed_markup_est_uses_outer_markers():
    stub = HashEmbeddingStub(dimension=4)
    rendered = "[CLS] [E1] [ET1=PERSON] a [/ET1=PERSON] [/E1] x [E2] [ET2=ORG] b [/ET2=ORG] [/E2] [SEP]"
    emb = embed_markup(rendered, stub)
    tokens = rendered.split()
    assert tokens[emb.e1_open] == "[E1]" and tokens[emb.e1_close] == "[/E1]"
    assert tokens[emb.e2_open] == "[E2]" and tokens[emb.e2_close] == "[/E2]"


# -- training fixtures --------------------------------------------------------

def blobs_fixture(n_per_class: int = 30, d: int = 8, seed: int = 5,
                  scheme: str = "cls_es", center_scale: float = 4.0):
    """Linearly separable Gaussian blobs posing as pooled summaries."""
    rng = np.random.default_rng(seed)
    p = pooled_dimension(scheme, d)
    labels = ("rel_a", "rel_b", "rel_c")
    centers = rng.normal(scale=center_scale, size=(len(labels), p))
    X, y, types = [], [], []
    type_cycle = (("PERSON", "ORG"), ("PERSON", "GPE"), ("ORG", "GPE"))
    for ci, label in enumerate(labels):
        for _ in range(n_per_class):
            X.append(centers[ci] + rng.normal(scale=0.3, size=p))
            y.append(label)
            types.append(type_cycle[ci])
    summaries = [PooledSummary(scheme, x) for x in X]
    return summaries, y, types


def test_loss_strictly_decreases_first_50_epochs():
    summaries, y, _ = blobs_fixture()
    model = train(summaries, y, TrainConfig(epochs=60, seed=0), mode="re")
    trace = model.loss_trace
    assert all(trace[i + 1] < trace[i] for i in range(50))


def test_training_accuracy_on_separable_fixture():
    summaries, y, _ = blobs_fixture()
    model = train(summaries, y, TrainConfig(epochs=500, seed=0), mode="re")
    preds = predict_batch(model, summaries)
    acc = sum(p == g for p, g in zip(preds, y)) / len(y)
    assert acc >= 0.99
    assert evaluate(preds, y).macro_f1 >= 0.99


def test_seeded_runs_bitwise_identical():
    summaries, y, types = blobs_fixture()
    for mode in ("re", "mt_no_share", "mt_share"):
        m1 = train(summaries, y, TrainConfig(epochs=50, seed=9), mode=mode,
                   entity_types=None if mode == "re" else types)
        m2 = train(summaries, y, TrainConfig(epochs=50, seed=9), mode=mode,
                   entity_types=None if mode == "re" else types)
        for name in m1.params:
            assert np.array_equal(m1.params[name], m2.params[name]), (mode, name)


def test_convexity_re_mode_inits_converge():
    # strong convexity via the L2 term; different inits land on the same optimum
    # (well-conditioned blobs so the fixed step size contracts in every direction)
    summaries, y, _ = blobs_fixture(n_per_class=15, d=4, center_scale=1.0)
    final_losses = []
    for scale, seed in ((0.0, 0), (0.5, 7), (1.0, 23)):
        model = train(
            summaries, y,
            TrainConfig(epochs=8000, learning_rate=0.1, l2=0.05, seed=seed),
            mode="re", head_init_scale=scale,
        )
        final_losses.append(model.loss_trace[-1])
    assert max(final_losses) - min(final_losses) < 1e-6


@pytest.mark.filterwarnings("ignore:invalid value encountered")
def test_nan_loss_reports_epoch():
    summaries, y, _ = blobs_fixture(n_per_class=3)
    bad = [PooledSummary(s.scheme, np.where(np.isfinite(s.vector), s.vector, 0.0))
           for s in summaries]
    bad[0] = PooledSummary(bad[0].scheme, bad[0].vector * np.inf)
    with pytest.raises(TrainingError, match="epoch"):
        train(bad, y, TrainConfig(epochs=5), mode="re")


def test_mt_modes_require_types():
    summaries, y, _ = blobs_fixture(n_per_class=3)
    with pytest.raises(ValueError, match="type"):
        train(summaries, y, mode="mt_no_share")


def test_cls_scheme_rejected_for_mt():
    summaries, y, types = blobs_fixture(n_per_class=3, scheme="cls")
    with pytest.raises(ValueError, match="entity blocks"):
        train(summaries, y, TrainConfig(epochs=2), mode="mt_share", entity_types=types)


# -- gradient check -----------------------------------------------------------

def _finite_difference_check(mode: str, seed: int = 13):
    rng = np.random.default_rng(seed)
    d = 4
    scheme = "cls_en"
    p = pooled_dimension(scheme, d)
    n = 12
    X = rng.normal(size=(n, p))
    y_rel = rng.integers(0, 3, size=n)
    y_t1 = rng.integers(0, 2, size=n)
    y_t2 = rng.integers(0, 2, size=n)
    params = {
        "W_rel": rng.normal(scale=0.3, size=(3, p + (2 * d if mode == "mt_share" else 0))),
        "b_rel": rng.normal(scale=0.1, size=3),
    }
    if mode != "re":
        params.update({
            "W_t1": rng.normal(scale=0.3, size=(2, d)),
            "b_t1": rng.normal(scale=0.1, size=2),
            "W_t2": rng.normal(scale=0.3, size=(2, d)),
            "b_t2": rng.normal(scale=0.1, size=2),
        })
    if mode == "mt_share":
        params["M1"] = rng.normal(scale=0.3, size=(d, d))
        params["M2"] = rng.normal(scale=0.3, size=(d, d))

    l2 = 1e-4
    eps = 1e-5
    _, grads = loss_and_gradients(params, X, y_rel, y_t1, y_t2, mode, scheme, l2)

    def loss_at(p2):
        value, _ = loss_and_gradients(p2, X, y_rel, y_t1, y_t2, mode, scheme, l2)
        return value

    for name, g in grads.items():
        flat = params[name].ravel()
        for idx in rng.choice(flat.size, size=min(5, flat.size), replace=False):
            bumped = {k: v.copy() for k, v in params.items()}
            bumped[name].ravel()[idx] += eps
            up = loss_at(bumped)
            bumped[name].ravel()[idx] -= 2 * eps
            down = loss_at(bumped)
            numeric = (up - down) / (2 * eps)
            analytic = g.ravel()[idx]
            denom = max(abs(numeric), abs(analytic), 1e-8)
            assert abs(numeric - analytic) / denom <= 1e-4, (mode, name, idx)


@pytest.mark.parametrize("mode", ["re", "mt_no_share", "mt_share"])
def test_gradients_match_finite_differences(mode):
    _finite_difference_check(mode)


# -- prediction ---------------------------------------------------------------

def test_zero_weight_model_uniform():
    summaries, y, _ = blobs_fixture(n_per_class=2)
    model = train(summaries, y, TrainConfig(epochs=0), mode="re")
    label, probs = predict(model, summaries[0])
    assert label == model.relation_labels[0]
    assert np.allclose(probs, 1.0 / len(model.relation_labels))
    assert abs(probs.sum() - 1.0) <= 1e-9


def test_probabilities_sum_to_one():
    summaries, y, _ = blobs_fixture()
    model = train(summaries, y, TrainConfig(epochs=100), mode="re")
    for s in summaries[:10]:
        _, probs = predict(model, s)
        assert abs(probs.sum() - 1.0) <= 1e-9


def test_softmax_shift_invariance():
    summaries, y, _ = blobs_fixture(n_per_class=4)
    model = train(summaries, y, TrainConfig(epochs=50), mode="re")
    _, probs = predict(model, summaries[0])
    shifted = train(summaries, y, TrainConfig(epochs=50), mode="re")
    shifted.params["b_rel"] = shifted.params["b_rel"] + 7.5  # constant on all logits
    _, probs2 = predict(shifted, summaries[0])
    assert np.allclose(probs, probs2, atol=1e-12)


def test_dim_mismatch_rejected():
    summaries, y, _ = blobs_fixture(n_per_class=2, d=4)
    model = train(summaries, y, TrainConfig(epochs=1), mode="re")
    with pytest.raises(ValueError, match="scheme"):
        predict(model, PooledSummary("cls", np.zeros(4)))
    with pytest.raises(ValueError, match="dimension"):
        predict(model, PooledSummary(model.scheme, np.zeros(5)))


def test_mt_share_predict_uses_transforms():
    summaries, y, types = blobs_fixture(n_per_class=10)
    model = train(summaries, y, TrainConfig(epochs=300, seed=2), mode="mt_share",
                  entity_types=types)
    preds = predict_batch(model, summaries)
    assert sum(p == g for p, g in zip(preds, y)) / len(y) >= 0.9


# -- persistence --------------------------------------------------------------

def test_model_json_round_trip(tmp_path):
    summaries, y, types = blobs_fixture(n_per_class=3)
    model = train(summaries, y, TrainConfig(epochs=10, seed=4), mode="mt_share",
                  entity_types=types)
    path = tmp_path / "model.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    assert set(doc) >= {"scheme", "mode", "dims", "weights", "config", "seed"}
    back = load_model(path)
    assert back.scheme == model.scheme and back.mode == model.mode
    for name in model.params:
        assert np.allclose(back.params[name], model.params[name])
    assert predict(back, summaries[0])[0] == predict(model, summaries[0])[0]


# -- per-relation ensemble ----------------------------------------------------

def _report(per: dict[str, float], fingerprint: str = "fp"):
    from relbootstrap.metrics import EvalReport, RelationScore

    scores = {r: RelationScore(0.0, 0.0, f1, support=1) for r, f1 in per.items()}
    return EvalReport(
        labels=tuple(sorted(per)), macro_f1=sum(per.values()) / len(per),
        micro_accuracy=0.0, per_relation=scores,
        confusion=np.zeros((len(per), len(per)), dtype=int), fingerprint=fingerprint,
    )


def test_ensemble_idempotent():
    a = _report({"r1": 0.8, "r2": 0.2})
    me = ensemble_per_relation(a, a)
    assert me.macro_f1 == pytest.approx(a.macro_f1)


def test_ensemble_max_rule():
    a = _report({"r1": 0.8, "r2": 0.2})
    b = _report({"r1": 0.4, "r2": 0.6})
    me = ensemble_per_relation(a, b)
    assert me.macro_f1 == pytest.approx(0.7)
    assert me.winner == {"r1": "a", "r2": "b"}


def test_ensemble_dominates_components(rng):
    for _ in range(50):
        rels = [f"r{i}" for i in range(rng.randint(2, 6))]
        a = _report({r: rng.random() for r in rels})
        b = _report({r: rng.random() for r in rels})
        me = ensemble_per_relation(a, b)
        assert me.macro_f1 >= max(a.macro_f1, b.macro_f1) - 1e-12


def test_ensemble_rejects_mismatched_test_sets():
    a = _report({"r1": 0.8}, fingerprint="one")
    b = _report({"r1": 0.4}, fingerprint="two")
    with pytest.raises(ValueError, match="identical test set"):
        ensemble_per_relation(a, b)
