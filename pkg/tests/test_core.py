import json

import numpy as np
import pytest

from axon import core
from axon.core import AxonModel, Step, TrainingSet, build_initial_basis, features, infer, train
from axon.errors import ModelCorrupt, RankDeficient, SchemaError
from axon.inner_opt import SolverConfig, leaky_relu
from axon.linalg import gs_append, thin_qr
from axon.problems import get_problem, rel_l2_error, sample

FAST = SolverConfig(restarts=8, max_iters=200)


@pytest.fixture(scope="module")
def x2_run():
    p = get_problem("x2")
    data = sample(p, 1000)
    model, report = train(data, 10, cfg=SolverConfig(seed=0))
    return p, data, model, report


def _train_features(model, data):
    return features(model, data.X)


class TestInitialBasis:
    def test_one_dimensional(self):
        V = build_initial_basis(np.array([0.0, 0.5, 1.0]))
        np.testing.assert_array_equal(V, [[1, 0], [1, 0.5], [1, 1]])

    def test_two_dimensional_row(self):
        V = build_initial_basis(np.array([[0.3, -0.7]]))
        np.testing.assert_array_equal(V, [[1, 0.3, -0.7]])

    def test_constant_input_is_rank_deficient(self):
        with pytest.raises(RankDeficient):
            thin_qr(build_initial_basis(np.full(3, 0.4)))

    def test_train_propagates_rank_deficiency(self):
        with pytest.raises(RankDeficient):
            train(TrainingSet(np.full(5, 0.4), np.arange(5.0)), 2)


class TestTrain:
    def test_affine_target_stops_immediately(self):
        x = np.linspace(0, 1, 50)
        model, report = train(TrainingSet(x, x), 5)
        assert report.stop_reason == "residual_below_tol"
        assert model.K == 0 and report.records == []
        assert report.initial_train_rel_l2 <= 1e-13

    def test_k_zero_is_affine_least_squares(self):
        x = np.linspace(0, 1, 40)
        y = np.exp(x)
        model, report = train(TrainingSet(x, y), 0)
        assert model.K == 0 and report.stop_reason == "completed"
        A = np.column_stack([np.ones_like(x), x])
        oracle = A @ np.linalg.lstsq(A, y, rcond=None)[0]
        np.testing.assert_allclose(infer(model, x), oracle, atol=1e-13)

    def test_x2_accuracy_and_monotonicity(self, x2_run):
        p, data, model, report = x2_run
        errs = report.train_errors()
        assert len(errs) == 11
        assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
        # oracle: least-squares piecewise-linear fit on 5 uniform knots
        knots = np.linspace(0, 1, 5)
        H = lambda x: np.column_stack([np.interp(x, knots, e) for e in np.eye(5)])
        coef = np.linalg.lstsq(H(data.X[:, 0]), data.y, rcond=None)[0]
        pl5 = rel_l2_error(lambda X: H(X[:, 0]) @ coef, p)
        assert pl5 == pytest.approx(1.0417e-2, rel=1e-3)
        greedy = rel_l2_error(lambda X: infer(model, X), p)
        assert greedy <= 1e-2
        assert greedy <= pl5

    def test_x2_error_quarters_per_neuron(self, x2_run):
        # each neuron should double the number of kinks, like the sawtooth construction
        errs = x2_run[3].train_errors()
        for a, b in zip(errs[:6], errs[1:7]):
            assert b / a == pytest.approx(0.25, abs=0.02)

    def test_training_predictions_are_qc(self, x2_run):
        _, data, model, _ = x2_run
        Q = _train_features(model, data)
        assert np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))) <= 1e-10
        np.testing.assert_allclose(Q.T @ data.y, model.c, atol=1e-12 * np.linalg.norm(data.y))

    def test_infer_matches_training_basis(self, x2_run):
        # rebuild Q exactly as train does and compare pointwise inference
        _, data, model, _ = x2_run
        basis = thin_qr(build_initial_basis(data.X))
        for st in model.steps:
            phi = np.maximum(basis.Q @ st.w, 0.0)
            _, _, q = gs_append(basis, phi)
            basis = basis.append(q)
        qc = basis.Q @ model.c
        pointwise = np.array([infer(model, float(x)) for x in data.X[::37, 0]])
        np.testing.assert_allclose(pointwise, qc[::37], atol=1e-8 * np.max(np.abs(data.y)))

    def test_infer_at_half(self, x2_run):
        p, _, model, report = x2_run
        assert abs(infer(model, 0.5) - 0.25) <= 1e-4

    def test_deterministic(self):
        data = sample(get_problem("sin20"), 200)
        a = train(data, 5, cfg=FAST)
        b = train(data, 5, cfg=FAST)
        np.testing.assert_array_equal(a[1].train_errors(), b[1].train_errors())
        np.testing.assert_array_equal(a[1].eval_errors(), b[1].eval_errors())
        np.testing.assert_array_equal(a[0].c, b[0].c)
        for sa, sb in zip(a[0].steps, b[0].steps):
            np.testing.assert_array_equal(sa.w, sb.w)

    def test_row_permutation_invariance(self):
        p = get_problem("exp")
        data = sample(p, 300)
        perm = np.random.default_rng(0).permutation(data.n)
        shuffled = TrainingSet(data.X[perm], data.y[perm])
        m1, _ = train(data, 4, cfg=FAST)
        m2, _ = train(shuffled, 4, cfg=FAST)
        X = np.linspace(0, 1, 101)
        np.testing.assert_allclose(infer(m1, X), infer(m2, X), atol=1e-10)

    def test_exact_kink_target_reaches_zero_residual(self):
        x = np.linspace(0, 1, 101)
        model, report = train(TrainingSet(x, np.abs(x - 0.5)), 5)
        assert report.stop_reason == "residual_below_tol"
        assert model.K == 1

    def test_truncated_model_matches_shorter_training(self, x2_run):
        _, data, model, _ = x2_run
        short, _ = train(data, 4, cfg=SolverConfig(seed=0))
        X = np.linspace(0, 1, 57)
        np.testing.assert_allclose(infer(model.truncated(4), X), infer(short, X), atol=1e-12)

    def test_leaky_relu_activation(self):
        data = sample(get_problem("sqrt"), 200)
        model, report = train(data, 3, g=leaky_relu(0.1), cfg=FAST)
        errs = report.train_errors()
        assert errs[-1] < errs[0]
        Q = features(model, data.X)
        np.testing.assert_allclose(Q @ model.c, data.y - (data.y - Q @ (Q.T @ data.y)), atol=1e-10)

    def test_eval_set_recorded(self):
        p = get_problem("exp")
        data = sample(p, 200)
        ev = sample(p, 2000)
        model, report = train(data, 3, cfg=FAST, eval_set=ev)
        assert not np.isnan(report.eval_errors()).any()
        direct = np.linalg.norm(infer(model, ev.X) - ev.y) / np.linalg.norm(ev.y)
        assert report.eval_errors()[-1] == pytest.approx(direct, rel=1e-12)


class TestInferContract:
    def _model(self):
        return AxonModel(1, np.eye(2), (Step(np.array([0.6, 0.8]), np.zeros(2), 1.0),), np.ones(3))

    def test_k0_affine(self):
        x = np.linspace(0, 1, 30)
        model, _ = train(TrainingSet(x, x), 0)
        assert infer(model, 0.3) == pytest.approx(0.3, abs=1e-12)

    def test_nonpositive_beta(self):
        m = self._model()
        bad = AxonModel(1, m.R, (Step(m.steps[0].w, m.steps[0].alpha, 0.0),), m.c)
        with pytest.raises(ModelCorrupt):
            infer(bad, 0.5)

    def test_length_mismatch(self):
        m = self._model()
        with pytest.raises(ModelCorrupt):
            infer(AxonModel(1, m.R, m.steps, np.ones(4)), 0.5)

    def test_batch_equals_pointwise(self):
        m = self._model()
        X = np.linspace(-1, 1, 7)
        np.testing.assert_array_equal(infer(m, X), [infer(m, float(x)) for x in X])


class TestSerialization:
    def test_round_trip_bit_exact(self, x2_run, tmp_path):
        model = x2_run[2]
        path = tmp_path / "m.json"
        core.save(model, path)
        loaded = core.load(path)
        X = np.random.default_rng(0).uniform(0, 1, 100)
        np.testing.assert_array_equal(infer(loaded, X), infer(model, X))
        doc = json.loads(path.read_text())
        assert doc["format_version"] == 1 and doc["K"] == 10 and doc["activation"] == "relu"

    def test_zero_beta_rejected(self, x2_run, tmp_path):
        doc = core.model_to_dict(x2_run[2])
        doc["steps"][3]["beta"] = 0
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError) as exc:
            core.load(path)
        assert exc.value.path == "steps[3].beta"

    def test_truncated_file_rejected(self, x2_run, tmp_path):
        path = tmp_path / "m.json"
        core.save(x2_run[2], path)
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(SchemaError):
            core.load(path)

    @pytest.mark.parametrize(
        "mutate, where",
        [
            (lambda d: d["steps"][0].update(w=d["steps"][0]["w"][:-1]), "steps[0].w"),
            (lambda d: d.update(c=d["c"] + [1.0]), "c"),
            (lambda d: d.update(K=d["K"] + 1), "steps"),
            (lambda d: d["R"][1].__setitem__(0, 0.5), "R"),
            (lambda d: d.update(activation="tanh"), "activation"),
            (lambda d: d.update(format_version=2), "format_version"),
        ],
    )
    def test_schema_errors_name_the_field(self, x2_run, tmp_path, mutate, where):
        doc = core.model_to_dict(x2_run[2])
        mutate(doc)
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError) as exc:
            core.load(path)
        assert exc.value.path == where

    def test_leaky_relu_round_trip(self, tmp_path):
        data = sample(get_problem("exp"), 100)
        model, _ = train(data, 2, g=leaky_relu(0.25), cfg=FAST)
        core.save(model, tmp_path / "m.json")
        loaded = core.load(tmp_path / "m.json")
        assert loaded.activation.slope == 0.25
        np.testing.assert_array_equal(infer(loaded, data.X), infer(model, data.X))
