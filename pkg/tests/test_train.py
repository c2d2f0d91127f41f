import numpy as np
import pytest

from pqbm.model import BMParameters, EncodedDataPoint, UnitLayout, init_params
from pqbm.samplers import SamplerConfig, enumerate_states
from pqbm.train import (
    Gradient,
    TrainConfig,
    apply_update,
    assemble_gradient,
    compute_gradient,
    evaluate,
    nll,
    phase_moments,
    predict,
    predict_scores,
    train,
    write_trace_csv,
)
from pqbm.model import energies

from conftest import bars_and_stripes, random_params

EXACT = SamplerConfig(kind="exact")


def zero_params(lay: UnitLayout) -> BMParameters:
    n = lay.n_units
    return BMParameters(lay, np.zeros(n), np.zeros((n, n)))


def fd_nll_gradient(params, inputs, labels, eps=1e-4):
    """Central finite differences of the exact NLL over every stored slot."""
    lay = params.layout
    d, n = lay.n_inputs, lay.n_units
    db = np.zeros(n)
    dw = np.zeros((n, n))
    for i in range(d, n):
        bump = np.zeros(n)
        bump[i] = eps
        up = nll(BMParameters(lay, params.biases + bump, params.weights), inputs, labels)
        dn = nll(BMParameters(lay, params.biases - bump, params.weights), inputs, labels)
        db[i] = (up - dn) / (2 * eps)
    iu, ju = np.triu_indices(n, k=1)
    for i, j in zip(iu, ju):
        if j < d:
            continue
        bump = np.zeros((n, n))
        bump[i, j] = eps
        up = nll(BMParameters(lay, params.biases, params.weights + bump), inputs, labels)
        dn = nll(BMParameters(lay, params.biases, params.weights - bump), inputs, labels)
        dw[i, j] = (up - dn) / (2 * eps)
    return db, dw


class TestPhaseMoments:
    def test_negative_phase_zero_params(self):
        lay = UnitLayout(3, 2, 1)
        dp = EncodedDataPoint(np.array([0.2, 0.8, 0.5]), np.array([1.0]))
        first, second = phase_moments(zero_params(lay), dp, "negative", EXACT)
        assert np.allclose(first, 0.5, atol=1e-12)
        assert second.shape == (3, 3)

    def test_positive_phase_carries_clamped_labels(self):
        lay = UnitLayout(2, 2, 1)
        dp = EncodedDataPoint(np.array([0.0, 1.0]), np.array([1.0]))
        first, second = phase_moments(zero_params(lay), dp, "positive", EXACT)
        assert first[2] == 1.0
        assert second[0, 2] == pytest.approx(first[0])
        assert second[1, 2] == pytest.approx(first[1])

    def test_exact_moments_match_enumeration_oracle(self, rng):
        # oracle: conditional expectations from full 2^n state enumeration
        lay = UnitLayout(2, 2, 1)
        p = random_params(lay, rng)
        v_d = np.array([1.0, 0.0])
        v_l = np.array([1.0])
        full = enumerate_states(lay.n_units).astype(float)
        keep = np.all(full[:, :2] == v_d, axis=1) & (full[:, 4] == 1.0)
        weights = np.exp(-energies(full[keep], p))
        weights /= weights.sum()
        hidden = full[keep][:, 2:4]
        want_first = weights @ hidden
        want_second = np.einsum("s,si,sj->ij", weights, hidden, hidden)
        dp = EncodedDataPoint(v_d, v_l)
        first, second = phase_moments(p, dp, "positive", EXACT)
        assert np.allclose(first[:2], want_first, atol=1e-12)
        assert second[0, 1] == pytest.approx(want_second[0, 1], abs=1e-12)

    def test_single_hidden_unit_has_empty_hidden_block(self, rng):
        lay = UnitLayout(3, 1, 1)
        p = random_params(lay, rng)
        dp = EncodedDataPoint(np.full(3, 0.5), np.array([1.0]))
        _, second = phase_moments(p, dp, "positive", EXACT)
        assert second[0, 0] == 0.0

    def test_invalid_phase(self, rng):
        p = random_params(UnitLayout(2, 1, 1), rng)
        dp = EncodedDataPoint(np.zeros(2), np.array([0.0]))
        with pytest.raises(ValueError, match="phase"):
            phase_moments(p, dp, "sideways", EXACT)


class TestComputeGradient:
    def test_identical_moments_give_zero(self, rng):
        lay = UnitLayout(3, 2, 1)
        p = random_params(lay, rng)
        delta1 = np.zeros((4, lay.n_free))
        delta2 = np.zeros((4, lay.n_free, lay.n_free))
        g = assemble_gradient(p, rng.uniform(0, 1, (4, 3)), delta1, delta2, 1.0)
        assert np.all(g.db == 0.0)
        assert np.all(g.dW == 0.0)

    def test_matches_finite_differences(self, rng):
        # ascent direction: g == -grad(NLL)/batch, checked per coordinate
        lay = UnitLayout(4, 3, 1)
        for seed in range(3):
            p = random_params(lay, np.random.default_rng(seed))
            local = np.random.default_rng(100 + seed)
            inputs = local.uniform(0, 1, (3, 4))
            labels = local.integers(0, 2, (3, 1)).astype(float)
            g = compute_gradient(p, (inputs, labels), EXACT)
            fd_db, fd_dw = fd_nll_gradient(p, inputs, labels)
            batch = inputs.shape[0]
            assert np.allclose(g.db, -fd_db / batch, atol=1e-5)
            assert np.allclose(g.dW, -fd_dw / batch, atol=1e-5)

    def test_zero_inputs_zero_input_weight_gradient(self, rng):
        lay = UnitLayout(4, 2, 1)
        p = random_params(lay, rng)
        g = compute_gradient(p, (np.zeros((1, 4)), np.ones((1, 1))), EXACT)
        assert np.all(g.dW[:4, :] == 0.0)

    def test_accepts_encoded_data_points(self, rng):
        lay = UnitLayout(2, 1, 1)
        p = random_params(lay, rng)
        dps = [EncodedDataPoint(np.array([0.1, 0.9]), np.array([1.0]))]
        g = compute_gradient(p, dps, EXACT)
        assert g.db.shape == (4,)

    def test_empty_batch_rejected(self, rng):
        p = random_params(UnitLayout(2, 1, 1), rng)
        with pytest.raises(ValueError, match="empty"):
            compute_gradient(p, (np.zeros((0, 2)), np.zeros((0, 1))), EXACT)


class TestApplyUpdate:
    def test_zero_learning_rate(self, rng):
        lay = UnitLayout(3, 2, 1)
        p = random_params(lay, rng)
        g = compute_gradient(p, (rng.uniform(0, 1, (2, 3)), np.ones((2, 1))), EXACT)
        q = apply_update(p, g, 0.0)
        assert np.array_equal(q.biases, p.biases)
        assert np.array_equal(q.weights, p.weights)

    def test_single_step_decreases_nll(self, rng):
        lay = UnitLayout(3, 2, 1)
        p = random_params(lay, rng)
        inputs = rng.uniform(0, 1, (4, 3))
        labels = rng.integers(0, 2, (4, 1)).astype(float)
        before = nll(p, inputs, labels)
        g = compute_gradient(p, (inputs, labels), EXACT)
        after = nll(apply_update(p, g, 0.05), inputs, labels)
        assert after < before

    def test_sequential_updates_commute_to_second_order(self, rng):
        lay = UnitLayout(2, 2, 1)
        p = random_params(lay, rng)
        batch_a = (rng.uniform(0, 1, (2, 2)), rng.integers(0, 2, (2, 1)).astype(float))
        batch_b = (rng.uniform(0, 1, (2, 2)), rng.integers(0, 2, (2, 1)).astype(float))

        def discrepancy(eta):
            g1 = compute_gradient(p, batch_a, EXACT)
            mid = apply_update(p, g1, eta)
            g2_seq = compute_gradient(mid, batch_b, EXACT)
            seq = apply_update(mid, g2_seq, eta)
            g2_base = compute_gradient(p, batch_b, EXACT)
            summed = apply_update(
                p, Gradient(g1.db + g2_base.db, g1.dW + g2_base.dW), eta
            )
            return max(
                np.abs(seq.biases - summed.biases).max(),
                np.abs(seq.weights - summed.weights).max(),
            )

        d1, d2 = discrepancy(0.05), discrepancy(0.025)
        assert d1 < 0.05  # small in absolute terms
        assert d2 <= 0.35 * d1 + 1e-12  # quadratic in the learning rate

    def test_shape_mismatch(self, rng):
        p = random_params(UnitLayout(2, 1, 1), rng)
        bad = Gradient(np.zeros(3), np.zeros((3, 3)))
        with pytest.raises(ValueError):
            apply_update(p, bad, 0.1)


class TestNll:
    def test_zero_parameters_log2_per_point(self):
        lay = UnitLayout(5, 3, 1)
        inputs = np.random.default_rng(0).uniform(0, 1, (7, 5))
        labels = np.ones((7, 1))
        assert nll(zero_params(lay), inputs, labels) == pytest.approx(7 * np.log(2))

    def test_hand_solved_instance(self):
        # only coupling: hidden-label weight w; P(l=1|v) = (1+e^w)/(3+e^w)
        lay = UnitLayout(1, 1, 1)
        w = np.zeros((3, 3))
        w[1, 2] = np.log(2.0)
        p = BMParameters(lay, np.zeros(3), w)
        got = nll(p, np.array([[0.7]]), np.array([[1.0]]))
        assert got == pytest.approx(np.log(5.0 / 3.0), abs=1e-12)

    def test_descent_is_monotone_over_50_steps(self, rng):
        lay = UnitLayout(3, 2, 1)
        p = random_params(lay, rng)
        inputs = rng.uniform(0, 1, (4, 3))
        labels = rng.integers(0, 2, (4, 1)).astype(float)
        values = [nll(p, inputs, labels)]
        for _ in range(50):
            p = apply_update(p, compute_gradient(p, (inputs, labels), EXACT), 0.2)
            values.append(nll(p, inputs, labels))
        assert np.all(np.diff(values) <= 1e-12)

    def test_layout_too_large(self):
        lay = UnitLayout(2, 24, 1)
        with pytest.raises(ValueError, match="NLL"):
            nll(zero_params(lay), np.zeros((1, 2)), np.zeros((1, 1)))


class TestPredict:
    def test_zero_params_score_half_and_tie_goes_to_one(self):
        lay = UnitLayout(4, 2, 1)
        label, score = predict(zero_params(lay), np.full(4, 0.3), EXACT)
        assert score == pytest.approx(0.5, abs=1e-12)
        assert label == 1

    def test_strong_negative_label_bias_forces_one(self, rng):
        # energy carries +b: a large negative label bias rewards s=1
        lay = UnitLayout(2, 1, 1)
        biases = np.array([0.0, 0.0, -10.0])
        p = BMParameters(lay, biases, np.zeros((3, 3)))
        x = np.array([0.5, 0.5])
        _, score = predict(p, x, EXACT)
        assert score >= 0.99
        for kind in ("gibbs", "sa"):
            cfg = SamplerConfig(kind=kind, reads=2000, sweeps=30, seed=1)
            _, s = predict(p, x, cfg)
            assert s >= 0.99, kind

    def test_exact_score_equals_conditional_probability(self, rng):
        lay = UnitLayout(3, 2, 1)
        p = random_params(lay, rng)
        v_d = rng.uniform(0, 1, 3)
        # oracle: ratio of clamped partition sums over label assignments
        from pqbm.model import clamp_inputs_and_label, clamp_inputs
        from pqbm.samplers import log_partition_batch
        from pqbm.model import ReducedBatch

        z = {}
        for lab in (0.0, 1.0):
            rp = clamp_inputs_and_label(p, v_d, np.array([lab]))
            batch = ReducedBatch(
                rp.linear[None, :], rp.couplings, np.array([rp.offset]), 1.0
            )
            z[lab] = np.exp(log_partition_batch(batch)[0])
        want = z[1.0] / (z[0.0] + z[1.0])
        _, score = predict(p, v_d, EXACT)
        assert score == pytest.approx(want, abs=1e-12)

    def test_multi_label_rejected(self, rng):
        p = random_params(UnitLayout(2, 1, 2), rng)
        with pytest.raises(ValueError, match="label"):
            predict_scores(p, np.zeros((1, 2)), EXACT)


class TestTrain:
    def test_zero_epochs(self, rng):
        lay = UnitLayout(4, 2, 1)
        p = init_params(lay, 3)
        cfg = TrainConfig(learning_rate=0.1, batch_size=2, epochs=0, sampler=EXACT)
        out, trace = train(p, rng.uniform(0, 1, (6, 4)), rng.integers(0, 2, (6, 1)), cfg)
        assert np.array_equal(out.biases, p.biases)
        assert np.array_equal(out.weights, p.weights)
        assert trace == []

    def test_deterministic_given_seed(self, rng):
        lay = UnitLayout(3, 2, 1)
        inputs = rng.uniform(0, 1, (8, 3))
        labels = rng.integers(0, 2, (8, 1)).astype(float)
        cfg = TrainConfig(
            learning_rate=0.3,
            batch_size=3,
            epochs=2,
            sampler=SamplerConfig(kind="sa", reads=50, sweeps=10),
            seed=5,
        )
        runs = [
            train(init_params(lay, 1), inputs, labels, cfg,
                  eval_sets={"train": (inputs, labels)})
            for _ in range(2)
        ]
        assert np.array_equal(runs[0][0].weights, runs[1][0].weights)
        assert runs[0][1] == runs[1][1]

    def test_trace_shape_and_ranges(self, rng):
        lay = UnitLayout(3, 2, 1)
        inputs = rng.uniform(0, 1, (10, 3))
        labels = (rng.random(10) < 0.5).astype(float)[:, None]
        cfg = TrainConfig(learning_rate=0.2, batch_size=4, epochs=3, sampler=EXACT)
        _, trace = train(
            init_params(lay, 0), inputs, labels, cfg,
            eval_sets={"val": (inputs, labels), "test": (inputs, labels)},
        )
        assert len(trace) == 3 * 2
        assert {r["epoch"] for r in trace} == {0, 1, 2}
        for r in trace:
            assert 0.0 <= r["acc"] <= 1.0
            assert 0.0 <= r["auc"] <= 1.0

    def test_bars_and_stripes_exact(self):
        inputs, labels = bars_and_stripes()
        lay = UnitLayout(16, 4, 1)
        cfg = TrainConfig(learning_rate=0.8, batch_size=1, epochs=20,
                          sampler=EXACT, seed=1)
        params, trace = train(
            init_params(lay, 1), inputs, labels, cfg,
            eval_sets={"train": (inputs, labels)},
        )
        assert max(r["acc"] for r in trace) == 1.0

    def test_sampled_gradient_converges_to_exact(self, rng):
        # median gradient error over seeds must shrink as reads grow
        lay = UnitLayout(3, 2, 1)
        p = random_params(lay, rng)
        inputs = rng.uniform(0, 1, (2, 3))
        labels = rng.integers(0, 2, (2, 1)).astype(float)
        g_exact = compute_gradient(p, (inputs, labels), EXACT)
        medians = []
        for reads in (100, 1000, 10000):
            errs = []
            for seed in range(20):
                cfg = SamplerConfig(
                    kind="sa", reads=reads, sa_schedule=(1.0,) * 40, seed=seed
                )
                g = compute_gradient(p, (inputs, labels), cfg, seed=seed)
                errs.append(
                    np.linalg.norm(g.db - g_exact.db)
                    + np.linalg.norm(g.dW - g_exact.dW)
                )
            medians.append(np.median(errs))
        assert medians[0] > medians[1] > medians[2]

    def test_trace_csv(self, tmp_path, rng):
        lay = UnitLayout(3, 1, 1)
        inputs = rng.uniform(0, 1, (6, 3))
        labels = (rng.random(6) < 0.5).astype(float)[:, None]
        cfg = TrainConfig(learning_rate=0.2, batch_size=3, epochs=2, sampler=EXACT)
        _, trace = train(init_params(lay, 0), inputs, labels, cfg,
                         eval_sets={"test": (inputs, labels)}, track_nll=True)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,split,acc,auc,nll"
        assert len(lines) == 1 + 2
        assert all(len(line.split(",")) == 5 for line in lines[1:])


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=-1)


class TestEvaluate:
    def test_perfectly_biased_model(self, rng):
        lay = UnitLayout(2, 1, 1)
        biases = np.array([0.0, 0.0, -10.0])
        p = BMParameters(lay, biases, np.zeros((3, 3)))
        inputs = rng.uniform(0, 1, (8, 2))
        labels = np.concatenate([np.ones(7), np.zeros(1)])[:, None]
        acc, auc_value = evaluate(p, inputs, labels, EXACT)
        assert acc == pytest.approx(7 / 8)
