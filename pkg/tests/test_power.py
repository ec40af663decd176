import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import ncx2

from core.errors import NumericalError, ParameterError
from fkwc.depth import DepthSpec
from fkwc.fdata import FunctionalDataset, Grid
from fkwc.power import (
    Density,
    LocalAlternativeSpec,
    density_from_draws,
    density_from_scipy,
    local_tau,
    mc_rank_prob,
    noncentral_chisq_sf,
    pairwise_probs,
    power_at,
    power_from_spec,
    predicted_power,
    required_sample_size,
    tau_from_pairwise,
)
from fkwc.ranktest import TestConfig, fkwc_test
from fkwc.sim import Family, ProcessModel, gen_eigen


def two_group_probs(eps):
    return np.array([[0.5, 0.5 + eps], [0.5 - eps, 0.5]])


class TestNoncentrality:
    def test_null_probabilities(self):
        probs = np.full((3, 3), 0.5)
        assert tau_from_pairwise(probs, [0.2, 0.3, 0.5], [20, 30, 50], 100) == 0.0

    def test_two_group_closed_form(self):
        N, eps = 100, 0.05
        tau = tau_from_pairwise(two_group_probs(eps), [0.5, 0.5], [50, 50], N)
        assert tau == pytest.approx(3 * N ** 2 * eps ** 2 / (N + 1))
        assert tau == pytest.approx(0.742574, abs=1e-6)

    def test_relabelling_groups(self):
        probs = np.array([[0.5, 0.6, 0.7], [0.4, 0.5, 0.55], [0.3, 0.45, 0.5]])
        thetas = np.array([0.2, 0.3, 0.5])
        order = [2, 0, 1]
        a = tau_from_pairwise(probs, thetas, thetas * 200, 200)
        b = tau_from_pairwise(probs[np.ix_(order, order)], thetas[order], thetas[order] * 200, 200)
        assert a == pytest.approx(b)

    def test_continuity(self):
        probs = np.array([[0.5, 0.6, 0.7], [0.4, 0.5, 0.55], [0.3, 0.45, 0.5]])
        thetas = [1 / 3] * 3
        base = tau_from_pairwise(probs, thetas, [30, 30, 30], 90)
        changes = []
        for eps in (1e-3, 1e-4, 1e-5):
            bumped = probs.copy()
            bumped[0, 2] += eps
            changes.append(abs(tau_from_pairwise(bumped, thetas, [30, 30, 30], 90) - base) / eps)
        # difference quotients settle on the derivative
        assert changes[-1] == pytest.approx(changes[-2], rel=1e-2)

    def test_probabilities_out_of_range(self):
        with pytest.raises(ParameterError):
            tau_from_pairwise(two_group_probs(0.7), [0.5, 0.5], [5, 5], 10)

    def test_thetas_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            tau_from_pairwise(two_group_probs(0.1), [0.5, 0.6], [5, 5], 10)


class TestNoncentralSurvival:
    def test_central_one_df(self):
        assert noncentral_chisq_sf(3.8415, 1, 0.0) == pytest.approx(0.05, abs=1e-4)

    def test_central_two_df(self):
        assert noncentral_chisq_sf(5.9915, 2, 0.0) == pytest.approx(np.exp(-5.9915 / 2), abs=1e-12)
        assert noncentral_chisq_sf(5.9915, 2, 0.0) == pytest.approx(0.05, abs=1e-4)

    def test_monotone_in_tau(self):
        values = [noncentral_chisq_sf(6.0, 3, tau) for tau in np.linspace(0, 60, 31)]
        assert np.all(np.diff(values) > 0)
        assert values[-1] > 0.999

    @pytest.mark.parametrize("df", [1, 3, 6])
    @pytest.mark.parametrize("tau", [0.5, 5.0, 20.0])
    @pytest.mark.parametrize("x", [1.0, 10.0, 40.0])
    def test_matches_integrated_density(self, df, tau, x):
        tail, _ = quad(lambda z: ncx2.pdf(z, df, tau), x, np.inf, limit=200, epsabs=1e-12)
        assert noncentral_chisq_sf(x, df, tau) == pytest.approx(tail, abs=1e-6)

    def test_invalid_arguments(self):
        with pytest.raises(ParameterError):
            noncentral_chisq_sf(1.0, 0, 1.0)


class TestLocalAlternative:
    def test_equal_shifts(self):
        spec = LocalAlternativeSpec((2.0, 2.0), (0.5, 0.5), density_from_scipy("expon"))
        assert local_tau(spec) == pytest.approx(0.0, abs=1e-12)

    def test_exponential_density(self):
        spec = LocalAlternativeSpec((0.0, 1.0), (0.5, 0.5), density_from_scipy("expon"))
        assert local_tau(spec) == pytest.approx(0.1875, abs=1e-4)

    @pytest.mark.parametrize("rate", [0.5, 2.0, 4.0])
    def test_rescaled_argument_leaves_tau(self, rate):
        spec = LocalAlternativeSpec((0.0, 1.0), (0.5, 0.5), density_from_scipy("expon", {"scale": 1 / rate}))
        assert local_tau(spec) == pytest.approx(0.1875, abs=1e-4)

    def test_shifting_all_deltas(self):
        density = density_from_scipy("chi2", {"df": 5})
        a = local_tau(LocalAlternativeSpec((0.0, 1.0, 3.0), (0.3, 0.3, 0.4), density))
        b = local_tau(LocalAlternativeSpec((10.0, 11.0, 13.0), (0.3, 0.3, 0.4), density))
        assert a == pytest.approx(b)

    def test_unnormalized_density(self):
        g = density_from_scipy("expon")
        doubled = Density(g.support, 2 * g.values, g.weights)
        with pytest.raises(NumericalError):
            local_tau(LocalAlternativeSpec((0.0, 1.0), (0.5, 0.5), doubled))

    def test_histogram_density(self):
        draws = np.random.default_rng(9).chisquare(5, size=200_000)
        g = density_from_draws(draws)
        assert g.mass == pytest.approx(1.0)
        spread = float(np.sum(g.weights * g.support * g.values ** 2))
        assert spread == pytest.approx(0.4244, abs=0.01)

    def test_mismatched_lengths(self):
        with pytest.raises(ParameterError):
            LocalAlternativeSpec((0.0, 1.0, 2.0), (0.5, 0.5), density_from_scipy("expon"))

    def test_unknown_distribution(self):
        with pytest.raises(ParameterError):
            density_from_scipy("not_a_distribution")


class TestPower:
    def test_null_power_is_alpha(self):
        assert predicted_power(0.0, 3, alpha=0.1).predicted_power == pytest.approx(0.1)

    def test_power_not_below_alpha(self):
        for tau in (0.0, 0.1, 2.0, 30.0):
            assert predicted_power(tau, 2).predicted_power >= 0.05 - 1e-9

    def test_local_alternative_power(self):
        spec = LocalAlternativeSpec((0.0, 5.0), (0.5, 0.5), density_from_scipy("chi2", {"df": 5}))
        result = predicted_power(local_tau(spec), 2)
        assert result.tau == pytest.approx(13.51, abs=0.02)
        assert result.predicted_power == pytest.approx(0.957, abs=0.005)

    def test_sample_size_round_trip(self):
        probs = two_group_probs(0.05)
        result = required_sample_size(0.8, probs, [0.5, 0.5])
        assert result.feasible
        assert power_at(probs, [0.5, 0.5], result.N).predicted_power >= 0.8
        assert power_at(probs, [0.5, 0.5], result.N - 1).predicted_power < 0.8

    def test_sample_size_at_lower_bound(self):
        result = required_sample_size(0.5, two_group_probs(0.49), [0.5, 0.5])
        assert result.N == 8

    def test_infeasible_target(self):
        result = required_sample_size(0.8, np.full((2, 2), 0.5), [0.5, 0.5])
        assert not result.feasible
        assert result.N is None
        assert "power at N=" in result.reason

    def test_target_below_alpha(self):
        with pytest.raises(ParameterError):
            required_sample_size(0.01, two_group_probs(0.1), [0.5, 0.5])


class TestRankProbability:
    def test_identical_models(self):
        model = ProcessModel(Family.GAUSSIAN, alpha=0.1, grid=Grid(51))
        result = mc_rank_prob(model, model, reps=10_000, seed=3)
        assert abs(result.estimate - 0.5) < 3 * result.std_error

    def test_larger_variance_has_larger_norms(self):
        small = ProcessModel(Family.GAUSSIAN, alpha=0.1, beta=1.0, grid=Grid(51))
        large = ProcessModel(Family.GAUSSIAN, alpha=0.1, beta=2.0, grid=Grid(51))
        result = mc_rank_prob(small, large, reps=10_000, seed=4)
        assert result.estimate - 0.5 > 3 * result.std_error
        assert 0.0 <= result.estimate <= 1.0

    def test_derivative_scores(self):
        model = ProcessModel(Family.EIGEN, eigenvalues=(1.0, 1.0, 1.0), grid=Grid(51))
        assert 0.0 <= mc_rank_prob(model, model, p=1, reps=500, seed=1).estimate <= 1.0

    def test_bad_order(self):
        model = ProcessModel(Family.EIGEN, eigenvalues=(1.0,), grid=Grid(11))
        with pytest.raises(ParameterError):
            mc_rank_prob(model, model, p=2)

    def test_pairwise_matrix(self):
        grid = Grid(31)
        models = [ProcessModel(Family.EIGEN, eigenvalues=(s, s), grid=grid) for s in (1.0, 2.0, 4.0)]
        probs = pairwise_probs(models, reps=2000, seed=5)
        np.testing.assert_allclose(np.diag(probs), 0.5)
        np.testing.assert_allclose(probs + probs.T, 1.0)
        # the low-variance group is the deeper one
        assert probs[0, 2] < 0.5


class TestPowerSpec:
    def test_tau_form(self):
        output = power_from_spec({"tau": 0.0, "J": 3, "alpha": 0.05})
        assert output["power"]["predicted_power"] == pytest.approx(0.05)

    def test_local_alternative_form(self):
        output = power_from_spec({"deltas": [0, 1], "thetas": [0.5, 0.5], "density": {"scipy": "expon"}})
        assert output["power"]["tau"] == pytest.approx(0.1875, abs=1e-4)

    def test_probability_form_with_target(self):
        output = power_from_spec({"probs": two_group_probs(0.05).tolist(), "target_power": 0.8})
        assert output["sample_size"]["feasible"]
        assert output["power"]["N"] == output["sample_size"]["N"]

    def test_probability_form_needs_size(self):
        with pytest.raises(ParameterError, match="'N' or 'target_power'"):
            power_from_spec({"probs": two_group_probs(0.05).tolist()})

    def test_model_form(self):
        payload = {
            "models": [
                {"family": "eigen", "eigenvalues": [1, 1], "grid_size": 21},
                {"family": "eigen", "eigenvalues": [2, 2], "grid_size": 21},
            ],
            "N": 100,
            "reps": 1000,
        }
        output = power_from_spec(payload, seed=2)
        assert len(output["probs"]) == 2
        assert output["power"]["predicted_power"] > 0.5

    def test_unknown_form(self):
        with pytest.raises(ParameterError):
            power_from_spec({"alpha": 0.05})


@pytest.mark.slow
class TestLocalAlternativeMonteCarlo:
    def test_predicted_power_matches_rejection_rate(self):
        N, reps, delta = 500, 2000, 5.0
        grid = Grid(51)
        null = (1.0,) * 5
        shifted = tuple(v * (1 + delta / np.sqrt(N)) for v in null)
        rng = np.random.default_rng(2024)
        config = TestConfig(DepthSpec("ltr"))
        rejections = 0
        for rep in range(reps):
            samples = [gen_eigen(null, N // 2, rng, grid), gen_eigen(shifted, N // 2, rng, grid)]
            ds = FunctionalDataset.from_groups(samples, grid)
            rejections += fkwc_test(ds, config).reject
        spec = LocalAlternativeSpec((0.0, delta), (0.5, 0.5), density_from_scipy("chi2", {"df": 5}))
        predicted = predicted_power(local_tau(spec), 2).predicted_power
        assert rejections / reps == pytest.approx(predicted, abs=0.05)
