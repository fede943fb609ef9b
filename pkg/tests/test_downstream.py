import numpy as np
import pytest

from tiltweigh import (
    ExtraConfig,
    GaussianLdaSpec,
    LabeledDataset,
    WeightVector,
    build_model_zoo,
    evaluate_target,
    finetune,
    fit_logistic,
    gen_group_shift,
    gen_lda,
    score_models,
    substream,
    weighted_expectation,
)
from tiltweigh.downstream import DEFAULT_ZOO_STRENGTHS
from tiltweigh.errors import LengthMismatch, SchemaError

from specs import GROUP_TO_CLASS, MINORITY_TGT_PROPS, SPURIOUS_SRC_PROPS, spurious_group_means


def wv_of(weights):
    w = np.asarray(weights, dtype=np.float64)
    return WeightVector(w, float(w.mean()), ExtraConfig(), 0.0)


class TestWeightedExpectation:
    def test_unit_weights_give_plain_mean(self):
        g = np.array([1.0, 2.0, 6.0])
        assert weighted_expectation(g, wv_of(np.ones(3))) == pytest.approx(3.0)

    def test_constant_function_gives_mean_weight(self):
        w = np.array([0.5, 1.5, 2.0, 0.1])
        assert weighted_expectation(np.full(4, 3.0), wv_of(w)) == pytest.approx(
            3.0 * w.mean()
        )

    def test_exact_atoms_match_target_expectation(self):
        # a source "sample" replicating exact rational cell counts: the
        # weighted mean must equal direct summation over atoms under the
        # implied target joint
        from tiltweigh import make_discrete_spec

        atoms = np.array([[-1.0], [0.0], [2.0]])
        joint = np.array([[0.25, 0.0], [0.125, 0.125], [0.0, 0.5]])
        spec = make_discrete_spec(atoms, joint, np.array([[0.4], [-0.2]]),
                                  np.array([0.1, 0.0]))
        n = 64
        counts = (spec.source_joint * n).astype(int)
        assert counts.sum() == n  # masses are exact multiples of 1/8
        rows, labels = [], []
        for i in range(spec.n_atoms):
            for k in range(spec.n_classes):
                rows.extend([spec.atoms[i]] * counts[i, k])
                labels.extend([k] * counts[i, k])
        feats = np.asarray(rows)
        labels = np.asarray(labels)
        w = spec.true_tilt().weights(feats, labels)
        g = feats[:, 0] ** 2 + labels  # arbitrary bounded statistic
        est = weighted_expectation(g, wv_of(w))
        q = spec.target_joint()
        direct = sum(
            q[i, k] * (spec.atoms[i, 0] ** 2 + k)
            for i in range(spec.n_atoms)
            for k in range(spec.n_classes)
        )
        assert est == pytest.approx(direct, abs=1e-10)

    def test_linearity(self):
        rng = substream(3)
        g1, g2 = rng.standard_normal(50), rng.standard_normal(50)
        w = wv_of(np.abs(rng.standard_normal(50)) + 0.1)
        lhs = weighted_expectation(2.0 * g1 + 3.0 * g2, w)
        rhs = 2.0 * weighted_expectation(g1, w) + 3.0 * weighted_expectation(g2, w)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            weighted_expectation(np.ones(3), wv_of(np.ones(4)))


class TestEvaluateTarget:
    def test_perfect_predictor_has_zero_risk(self):
        ds = LabeledDataset(np.array([[-2.0], [2.0], [-3.0]]), np.array([0, 1, 0]))
        clf = fit_logistic(ds, "l2", 1e-3, 1e-8, 500)
        w = wv_of(np.array([0.5, 2.0, 0.5]))
        assert evaluate_target(clf, ds, w, "zero-one") == 0.0

    def test_unit_weights_reduce_to_source_risk(self):
        spec = GaussianLdaSpec([0.5, 0.5], [[-1.0], [1.0]], [[-1.0], [1.0]])
        src, _, _, _ = gen_lda(spec, 500, 100, 3)
        clf = fit_logistic(src, "l2", 0.1, 1e-7, 300)
        risk = evaluate_target(clf, src, wv_of(np.ones(src.n)), "zero-one")
        assert risk == pytest.approx(1.0 - clf.accuracy(src))

    def test_oracle_weights_estimate_target_error(self):
        spec = GaussianLdaSpec(
            [0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [[-0.4, 0.4], [1.6, -0.4]]
        )
        src, _, truth, tgt_lab = gen_lda(spec, 20_000, 20_000, 5)
        clf = fit_logistic(src, "l2", 1e-2, 1e-7, 300)
        w = wv_of(truth.weights(src.features, src.labels))
        est = evaluate_target(clf, src, w, "zero-one")
        true_err = 1.0 - clf.accuracy(tgt_lab)
        assert abs(est - true_err) <= 0.02

    def test_nll_loss(self):
        ds = LabeledDataset(np.array([[-2.0], [2.0]]), np.array([0, 1]))
        clf = fit_logistic(ds, "l2", 0.5, 1e-8, 300)
        val = evaluate_target(clf, ds, wv_of(np.ones(2)), "nll")
        assert val == pytest.approx(clf.nll(ds), abs=1e-9)

    def test_zero_one_risk_bounded_by_max_weight(self):
        rng = substream(11)
        ds = LabeledDataset(rng.standard_normal((200, 2)), rng.integers(0, 2, 200))
        clf = fit_logistic(ds, "l2", 10.0, 1e-6, 100)
        w = np.abs(rng.standard_normal(200)) + 0.05
        risk = evaluate_target(clf, ds, wv_of(w), "zero-one")
        assert 0.0 <= risk <= w.max()


class TestFinetune:
    def test_unit_weights_reproduce_plain_fit(self):
        spec = GaussianLdaSpec([0.5, 0.5], [[-1.0, 0.2], [1.0, -0.2]],
                               [[-1.0, 0.2], [1.0, -0.2]])
        src, _, _, _ = gen_lda(spec, 400, 100, 9)
        a = finetune(src, wv_of(np.ones(src.n)), "l2", 0.1, 1e-7, 400)
        b = fit_logistic(src, "l2", 0.1, 1e-7, 400)
        assert float(np.max(np.abs(a.W - b.W))) <= 1e-3
        assert float(np.max(np.abs(a.b - b.b))) <= 1e-3

    def test_weights_concentrated_on_one_class_collapse_predictions(self):
        rng = substream(10)
        x = rng.standard_normal((300, 2))
        y = (x[:, 0] > 0).astype(int)
        src = LabeledDataset(x, y)
        w = np.where(y == 1, 1.0, 1e-8)
        clf = finetune(src, wv_of(w), "l2", 1e-3, 1e-7, 400)
        assert np.mean(clf.predict(x) == 1) > 0.95

    def test_minority_group_weights_beat_uniform(self):
        # true group-indicator weights: the weighted fit must adapt to the
        # minority-group target far better than uniform ERM
        src, tgt, tgt_lab = gen_group_shift(
            spurious_group_means(), GROUP_TO_CLASS, SPURIOUS_SRC_PROPS,
            MINORITY_TGT_PROPS, 4000, 3000, 77,
        )
        ind = np.isin(src.groups, [1, 2]).astype(float)
        w = ind * (src.n / ind.sum()) + 1e-6
        weighted = finetune(src, wv_of(w), "l2", 1e-2, 1e-7, 400)
        uniform = fit_logistic(src, "l2", 1e-2, 1e-7, 400)
        assert weighted.accuracy(tgt_lab) >= uniform.accuracy(tgt_lab) + 0.05


class TestScoreModels:
    def _setup(self, n=600, seed=4):
        spec = GaussianLdaSpec([0.5, 0.5], [[-1.2], [1.2]], [[-0.8], [1.6]])
        src, _, _, tgt_lab = gen_lda(spec, n, n, seed)
        zoo = [fit_logistic(src, "l2", s, 1e-6, 200) for s in (1e-3, 0.1, 10.0)]
        return src, tgt_lab, zoo

    def test_singleton_zoo_selected_by_every_score(self):
        src, tgt_lab, zoo = self._setup()
        rows, summary = score_models(zoo[:1], src, wv_of(np.ones(src.n)), tgt_lab)
        assert summary["selected"] == {"srcval": 0, "weighted": 0}

    def test_unit_weights_make_scores_equal(self):
        src, tgt_lab, zoo = self._setup()
        rows, _ = score_models(zoo, src, wv_of(np.ones(src.n)))
        for r in rows:
            assert r.weighted == pytest.approx(r.srcval, abs=1e-12)

    def test_selection_invariant_to_weight_scaling(self):
        src, tgt_lab, zoo = self._setup()
        rng = substream(6)
        w = np.abs(rng.standard_normal(src.n)) + 0.2
        _, s1 = score_models(zoo, src, wv_of(w), tgt_lab)
        _, s2 = score_models(zoo, src, wv_of(7.5 * w), tgt_lab)
        assert s1["selected"]["weighted"] == s2["selected"]["weighted"]

    def test_external_scores_slot(self):
        src, tgt_lab, zoo = self._setup()
        ext = [0.1, 0.9, 0.5]
        rows, summary = score_models(zoo, src, wv_of(np.ones(src.n)), tgt_lab, ext)
        assert summary["selected"]["external"] == 1
        assert "external" in summary["spearman"]
        assert rows[2].external == 0.5

    def test_empty_zoo_rejected(self):
        src, _, _ = self._setup()
        with pytest.raises(SchemaError):
            score_models([], src, wv_of(np.ones(src.n)))


class TestBuildModelZoo:
    def _src(self, with_groups):
        rng = substream(8)
        x = rng.standard_normal((120, 2))
        y = (x[:, 0] > 0).astype(int)
        g = rng.integers(0, 3, 120) if with_groups else None
        return LabeledDataset(x, y, g)

    def test_default_strength_grid_endpoints(self):
        assert DEFAULT_ZOO_STRENGTHS[0] == pytest.approx(1e-4)
        assert DEFAULT_ZOO_STRENGTHS[-1] == pytest.approx(1e-1)
        assert len(DEFAULT_ZOO_STRENGTHS) == 20

    def test_with_groups_builds_120_models(self):
        zoo, skipped = build_model_zoo(self._src(True), max_iter=25)
        assert len(zoo) == 120 and not skipped

    def test_without_groups_builds_80_models(self):
        zoo, skipped = build_model_zoo(self._src(False), max_iter=25)
        assert len(zoo) == 80 and skipped

    def test_reduced_grid(self):
        zoo, _ = build_model_zoo(self._src(True), strengths=(1e-4, 1e-1), max_iter=25)
        assert len(zoo) == 12


def test_concept_drift_zoo_ranking():
    # weighted validation accuracy must rank models for the minority-group
    # target better than raw source validation accuracy
    from tiltweigh import calibrate, fit_extra
    from tiltweigh.data import SplitSpec, split
    src, tgt, tgt_lab = gen_group_shift(
        spurious_group_means(), GROUP_TO_CLASS, SPURIOUS_SRC_PROPS,
        MINORITY_TGT_PROPS, 4000, 3000, 900,
    )
    half_a, half_b = split(src, SplitSpec(0.5, 0))
    zoo, _ = build_model_zoo(half_a, strengths=(1e-4, 1e-1), max_iter=150)
    fit_part, hold = split(half_b, SplitSpec(0.8, 0))
    clf = calibrate(fit_logistic(fit_part, "l2", 1e-3, 1e-7, 400), hold, "ts")
    cfg = ExtraConfig(learning_rate=5e-4, batch_size=500, epochs=100, seed=1)
    _, wv = fit_extra(clf, half_b, tgt, cfg)
    rows, summary = score_models(zoo, half_b, wv, tgt_lab)
    assert len(rows) == 12
    sp = summary["spearman"]
    assert sp["weighted"] > sp["srcval"]
    assert sp["weighted"] > 0
