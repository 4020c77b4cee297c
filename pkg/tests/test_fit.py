"""Origin rule, RSS, parameter transform, optimizer, model-order selection."""

import json
import math
import warnings

import numpy as np
import pytest

import stochtaylor.fit as fit_mod
from stochtaylor import (
    Dataset,
    DomainError,
    FitConfig,
    FitFailure,
    RngStream,
    SelectedFit,
    UnderdeterminedWarning,
    choose_origin,
    evaluate,
    fit_fixed_m,
    from_taylor_polynomial,
    objective_gradient,
    objective_value,
    pack_params,
    predict_grid,
    rss,
    select_model,
    sigma2_mle,
    unpack_params,
)
from stochtaylor.bench import get_test_function, make_dataset
from stochtaylor.fit import fit_result_to_dict, params_width, selected_fit_to_dict

from conftest import random_model


def single_power_dataset(K: int = 200) -> Dataset:
    x = np.linspace(0.1, 3.0, K)
    return Dataset(x[:, None], 2.0 * x**1.5)


class TestChooseOrigin:
    def test_five_percent_below_range(self):
        x0 = choose_origin(np.array([[1.0], [2.0], [3.0]]), 0.05)
        assert x0 == pytest.approx([0.9], abs=1e-15)

    def test_constant_column_floor(self):
        x0 = choose_origin(np.array([[5.0], [5.0], [5.0]]), 0.05)
        assert x0 == pytest.approx([5.0 - 1e-6], abs=1e-18)

    def test_per_coordinate(self):
        X = np.array([[1.0, 10.0], [3.0, 30.0]])
        x0 = choose_origin(X, 0.1)
        assert x0 == pytest.approx([1.0 - 0.2, 10.0 - 2.0], abs=1e-12)


class TestRss:
    def test_exact_generator_is_zero(self):
        model = from_taylor_polynomial((0.5, -1.0, 2.0), 0.0)
        x = np.linspace(0.2, 2.0, 50)
        data = Dataset(x[:, None], predict_grid(model, x[:, None]))
        assert rss(model, data) <= 1e-18 * float(data.y @ data.y)

    def test_zero_model_gives_sum_of_squares(self):
        model = from_taylor_polynomial((0.0,), 0.0)
        x = np.linspace(0.5, 2.0, 20)
        y = np.sin(x)
        data = Dataset(x[:, None], y)
        assert rss(model, data) == pytest.approx(float(y @ y), rel=1e-14)

    def test_noise_variance_recovered_on_cubic(self):
        fn = get_test_function("cubic")
        data = make_dataset(fn, 100, 1.0, RngStream(0, 0))
        cfg = FitConfig(n_starts=20, max_iters=40, seed=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnderdeterminedWarning)
            sel = select_model(data, 5, cfg)
        assert 0.5 <= sel.chosen.sigma2 <= 2.0


class TestSigma2Mle:
    def test_zero_rss(self):
        assert sigma2_mle(0.0, 10) == 0.0

    def test_plain_ratio(self):
        assert sigma2_mle(5.0, 10) == 0.5

    def test_matches_fit_result_exactly(self):
        data = single_power_dataset(60)
        result = fit_fixed_m(data, 1, FitConfig(n_starts=4, max_iters=100, seed=0), [0.0])
        assert result.sigma2 == result.rss / data.K


class TestPackUnpack:
    def test_round_trip(self):
        model = random_model(60, 2, 3)
        clone = unpack_params(pack_params(model), model.m, model.d, model.x0)
        for got, want in zip(clone.components, model.components):
            assert got.mu_a == pytest.approx(want.mu_a, abs=1e-10)
            assert got.sigma_a == pytest.approx(want.sigma_a, rel=1e-10, abs=1e-10)
            assert np.asarray(got.mu_n) == pytest.approx(np.asarray(want.mu_n), abs=1e-10)
            assert np.asarray(got.sigma_n) == pytest.approx(
                np.asarray(want.sigma_n), rel=1e-10, abs=1e-10
            )
            assert np.asarray(got.rho) == pytest.approx(np.asarray(want.rho), abs=1e-10)

    def test_zero_z_gives_zero_rho(self):
        d = 2
        v = np.zeros(params_width(d))
        v[0] = 1.5
        model = unpack_params(v, 1, d, (0.0, 0.0))
        assert model.components[0].rho == (0.0, 0.0)

    def test_correlation_norm_saturates_monotonically(self):
        d = 2
        sums = []
        for t in (1.0, 10.0, 100.0):
            v = np.zeros(params_width(d))
            v[2 + 2 * d :] = t / math.sqrt(d)
            model = unpack_params(v, 1, d, (0.0, 0.0))
            sums.append(sum(r**2 for r in model.components[0].rho))
        assert sums[0] < sums[1] < sums[2] < 1.0
        assert sums[2] > 0.999

    def test_sigma_stays_above_floor(self):
        v = -1e6 * np.ones(params_width(1))
        model = unpack_params(v, 1, 1, (0.0,))
        assert model.components[0].sigma_a >= fit_mod.SIGMA_FLOOR
        assert model.components[0].sigma_n[0] >= fit_mod.SIGMA_FLOOR

    def test_rejects_wrong_length(self):
        with pytest.raises(DomainError):
            unpack_params(np.zeros(7), 1, 1, (0.0,))


class TestObjective:
    def test_value_equals_rss_of_unpacked_model(self):
        model = random_model(61, 1, 2)
        v = pack_params(model)
        x = np.linspace(0.5, 2.5, 40)
        data = Dataset(x[:, None], np.cos(x))
        want = rss(unpack_params(v, 2, 1, (0.0,)), data)
        assert objective_value(v, 2, data, (0.0,)) == pytest.approx(want, rel=1e-12)

    def test_gradient_matches_central_differences(self):
        gen = RngStream(62, 0).generator()
        x = np.linspace(0.4, 2.2, 40)
        data = Dataset(x[:, None], np.sin(2 * x))
        m, d = 2, 1
        x0 = (0.0,)
        step = 1e-6
        for _ in range(5):
            v = gen.uniform(-1.0, 1.0, m * params_width(d))
            grad = objective_gradient(v, m, data, x0)
            for j in range(v.size):
                vp, vm = v.copy(), v.copy()
                vp[j] += step
                vm[j] -= step
                fd = (objective_value(vp, m, data, x0) - objective_value(vm, m, data, x0)) / (
                    2 * step
                )
                scale = max(abs(fd), abs(grad[j]), 1e-8)
                assert abs(grad[j] - fd) <= 1e-4 * scale


class TestDataset:
    def test_promotes_one_dimensional_x(self):
        data = Dataset(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        assert data.X.shape == (2, 1)
        assert data.K == 2 and data.d == 1

    def test_arrays_are_read_only(self):
        data = single_power_dataset(10)
        with pytest.raises(ValueError):
            data.X[0, 0] = 99.0
        with pytest.raises(ValueError):
            data.y[0] = 99.0

    def test_rejects_length_mismatch(self):
        with pytest.raises(DomainError):
            Dataset(np.ones((3, 1)), np.ones(2))

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            Dataset(np.array([[1.0], [math.inf]]), np.ones(2))

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            Dataset(np.empty((0, 1)), np.empty(0))


class TestFitConfig:
    def test_defaults(self):
        cfg = FitConfig()
        assert cfg.n_starts == 20
        assert cfg.max_iters == 500
        assert cfg.select_tol == 1e-3
        assert cfg.delta_frac == 0.05

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_starts": 0},
            {"max_iters": 0},
            {"rel_tol": 0.0},
            {"delta_frac": 0.0},
            {"select_tol": -1e-3},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(DomainError):
            FitConfig(**kwargs)


class TestFitFixedM:
    def test_single_power_recovery(self):
        data = single_power_dataset()
        result = fit_fixed_m(data, 1, FitConfig(seed=0), [0.0])
        assert result.rss <= 1e-8 * float(data.y @ data.y)
        held = np.linspace(0.15, 2.8, 37)[:, None]
        got = predict_grid(result.model, held)
        want = 2.0 * held[:, 0] ** 1.5
        assert np.max(np.abs(got - want) / np.abs(want)) <= 1e-4

    def test_sigma2_attached_to_model(self):
        data = single_power_dataset(80)
        result = fit_fixed_m(data, 1, FitConfig(n_starts=4, max_iters=100, seed=0), [0.0])
        assert result.model.sigma2 == result.sigma2

    def test_underdetermined_warns_but_fits(self):
        x = np.linspace(0.5, 2.0, 8)
        data = Dataset(x[:, None], x)
        with pytest.warns(UnderdeterminedWarning):
            result = fit_fixed_m(data, 2, FitConfig(n_starts=2, max_iters=8, seed=0), [0.0])
        assert result.underdetermined
        assert math.isfinite(result.rss)

    def test_deterministic(self):
        data = single_power_dataset(100)
        cfg = FitConfig(n_starts=6, max_iters=120, seed=3)
        r1 = fit_fixed_m(data, 2, cfg, [0.0])
        r2 = fit_fixed_m(data, 2, cfg, [0.0])
        assert r1.model == r2.model
        assert r1.rss == r2.rss
        assert r1.best_start_index == r2.best_start_index

    def test_all_starts_failing_raises_named_error(self, monkeypatch):
        class Diverged:
            cost = math.inf
            status = 0
            x = None

        monkeypatch.setattr(fit_mod, "least_squares", lambda *a, **k: Diverged())
        data = single_power_dataset(30)
        with pytest.raises(FitFailure, match="M=3"):
            fit_fixed_m(data, 3, FitConfig(n_starts=2, max_iters=8, seed=0), [0.0])

    def test_rejects_bad_m_and_x0(self):
        data = single_power_dataset(20)
        with pytest.raises(DomainError):
            fit_fixed_m(data, 0, FitConfig(), [0.0])
        with pytest.raises(DomainError):
            fit_fixed_m(data, 1, FitConfig(), [0.0, 0.0])


class TestSelectModel:
    def test_identity_data_selects_one_component(self):
        fn = get_test_function("identity")
        data = make_dataset(fn, 200, 1e-5, RngStream(1, 0))
        cfg = FitConfig(n_starts=4, max_iters=200, seed=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnderdeterminedWarning)
            sel = select_model(data, 8, cfg, x0=[0.0])
        assert sel.chosen_m == 1

    def test_noiseless_ties_resolve_to_smallest_m(self):
        data = single_power_dataset(120)
        cfg = FitConfig(n_starts=4, max_iters=200, seed=0)
        sel = select_model(data, 3, cfg, x0=[0.0])
        assert sel.chosen_m == 1
        # larger orders may reach numerically smaller RSS, yet stay inside
        # the tie window, so the smallest order wins
        assert sel.chosen.rss <= (1 + cfg.select_tol) * min(
            r.rss for r in sel.per_m.values()
        ) + 1e-6 * float(data.y @ data.y)

    def test_reports_all_orders(self):
        data = single_power_dataset(100)
        sel = select_model(data, 3, FitConfig(n_starts=2, max_iters=40, seed=0))
        assert set(sel.per_m) == {1, 2, 3}
        assert sel.chosen is sel.per_m[sel.chosen_m]
        assert sel.failures == {}

    def test_deterministic(self):
        fn = get_test_function("cubic")
        data = make_dataset(fn, 80, 1.0, RngStream(5, 0))
        cfg = FitConfig(n_starts=4, max_iters=40, seed=0)
        s1 = select_model(data, 3, cfg)
        s2 = select_model(data, 3, cfg)
        assert s1.chosen_m == s2.chosen_m
        assert s1.chosen.model == s2.chosen.model
        assert {m: r.rss for m, r in s1.per_m.items()} == {
            m: r.rss for m, r in s2.per_m.items()
        }

    def test_explicit_origin_is_used(self):
        data = single_power_dataset(60)
        sel = select_model(data, 1, FitConfig(n_starts=2, max_iters=40, seed=0), x0=[-0.5])
        assert sel.chosen.model.x0 == (-0.5,)

    def test_inconsistent_selected_fit_rejected(self):
        data = single_power_dataset(40)
        cfg = FitConfig(n_starts=2, max_iters=20, seed=0)
        r1 = fit_fixed_m(data, 1, cfg, [0.0])
        r2 = fit_fixed_m(data, 2, cfg, [0.0])
        with pytest.raises(DomainError):
            SelectedFit(per_m={1: r1, 2: r2}, chosen_m=1, chosen=r2, failures={})


class TestSerializationHelpers:
    def test_fit_result_dict_is_json_ready(self):
        data = single_power_dataset(50)
        result = fit_fixed_m(data, 1, FitConfig(n_starts=2, max_iters=40, seed=0), [0.0])
        doc = fit_result_to_dict(result)
        text = json.dumps(doc)
        assert doc["rss"] == result.rss
        assert doc["sigma2"] == result.sigma2
        assert "model" in json.loads(text)

    def test_selected_fit_dict_includes_rss_table(self):
        data = single_power_dataset(50)
        sel = select_model(data, 2, FitConfig(n_starts=2, max_iters=40, seed=0))
        doc = selected_fit_to_dict(sel)
        json.dumps(doc)
        assert doc["fit"]["chosen_m"] == sel.chosen_m
        assert set(doc["fit"]["per_m_rss"]) == {"1", "2"}
