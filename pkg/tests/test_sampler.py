import numpy as np
import pytest

from csrecon.diffusion import GaussianScore, linear_schedule
from csrecon.forward import MeasurementPlan, apply
from csrecon.masks import FourierStrategy, PixelMaskSet, make_fourier_mask
from csrecon.sampler import (
    GuidanceSchedule,
    SamplerTrace,
    guidance_weights,
    sample_posterior,
    trace_to_csv,
)
from csrecon.sparse import NumericalFailure
from csrecon.transforms import ParameterError


def _identity_plan(side=8):
    ones = np.ones((1, side, side), dtype=np.uint8)
    return MeasurementPlan(mask=PixelMaskSet(side=side, count=1, kernel=1, masks=ones))


# ---------------------------------------------------------------- weights


def test_guidance_weights_endpoints():
    g = GuidanceSchedule()
    assert guidance_weights(1, 1000, g) == (0.1, 1e-10)
    assert guidance_weights(1000, 1000, g) == (0.9, 1.0)
    k, z = guidance_weights(500, 1000, g)
    frac = 499 / 999
    assert k == pytest.approx(0.1 + frac * 0.8)
    assert z == pytest.approx(1e-10 + frac * (1.0 - 1e-10))


def test_guidance_weights_single_step_convention():
    g = GuidanceSchedule(kappa_min=0.2, kappa_max=0.7, zeta_min=0.1, zeta_max=0.5)
    assert guidance_weights(1, 1, g) == (0.7, 0.5)


def test_guidance_weights_rejects_out_of_range():
    g = GuidanceSchedule()
    with pytest.raises(ParameterError):
        guidance_weights(0, 100, g)
    with pytest.raises(ParameterError):
        guidance_weights(101, 100, g)


# ---------------------------------------------------------------- sampling


def test_sampler_deterministic_given_seed():
    side = 8
    sch = linear_schedule(50, 1e-3, 0.05)
    score = GaussianScore(mean=np.zeros((side, side)), variance=0.1, schedule=sch)
    plan = _identity_plan(side)
    y = apply(plan, np.random.default_rng(0).uniform(-0.5, 0.5, (side, side)))
    a, _ = sample_posterior(y, score, sch, seed=3)
    b, _ = sample_posterior(y, score, sch, seed=3)
    c, _ = sample_posterior(y, score, sch, seed=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sampler_output_clipped_and_finite():
    side = 8
    sch = linear_schedule(50, 1e-3, 0.05)
    score = GaussianScore(mean=np.zeros((side, side)), variance=0.5, schedule=sch)
    plan = _identity_plan(side)
    y = apply(plan, np.random.default_rng(1).uniform(-1, 1, (side, side)))
    x, trace = sample_posterior(y, score, sch, seed=0)
    assert x.shape == (side, side)
    assert np.all(np.isfinite(x))
    assert np.max(x) <= 1.0 and np.min(x) >= -1.0
    assert len(trace.steps) == 50
    assert trace.steps[0] == 50 and trace.steps[-1] == 1  # reverse order


def test_sampler_zero_guidance_matches_prior_statistics():
    # with zeta == 0 everywhere the measurement never enters: samples follow
    # the diffused prior; small-scale version of the distribution check
    side = 4
    sch = linear_schedule(200, 1e-4, 0.02)
    mu = np.full((side, side), 0.1)
    v = 0.04
    score = GaussianScore(mean=mu, variance=v, schedule=sch)
    plan = _identity_plan(side)
    y = apply(plan, np.random.default_rng(2).uniform(-1, 1, (side, side)))
    g = GuidanceSchedule(zeta_min=0.0, zeta_max=0.0)
    x, _ = sample_posterior(y, score, sch, guidance=g, seed=5, chains=400)
    assert x.shape == (400, side, side)
    se_mean = np.sqrt(v / 400)
    assert np.max(np.abs(x.mean(axis=0) - mu)) < 4 * se_mean
    assert np.var(x) == pytest.approx(v, rel=0.2)


def test_sampler_guidance_reduces_residual():
    side = 8
    sch = linear_schedule(300, 1e-4, 0.02)
    score = GaussianScore(mean=np.zeros((side, side)), variance=0.25, schedule=sch)
    plan = _identity_plan(side)
    target = np.random.default_rng(3).uniform(-0.7, 0.7, (side, side))
    y = apply(plan, target)
    g = GuidanceSchedule(zeta_min=0.5)
    x, trace = sample_posterior(y, score, sch, guidance=g, seed=1)
    assert trace.residuals[-1] < trace.residuals[0]
    rel_err = np.linalg.norm(x - target) / np.linalg.norm(target)
    assert rel_err < 0.05


def test_sampler_momentum_lookahead_differs_from_plain_gradient():
    # kappa=0 removes the look-ahead; outputs must differ when kappa > 0
    side = 8
    sch = linear_schedule(100, 1e-4, 0.02)
    score = GaussianScore(mean=np.zeros((side, side)), variance=0.25, schedule=sch)
    plan = _identity_plan(side)
    y = apply(plan, np.random.default_rng(4).uniform(-0.5, 0.5, (side, side)))
    with_m = GuidanceSchedule(kappa_min=0.5, kappa_max=0.9, zeta_min=0.1, zeta_max=0.3)
    without = GuidanceSchedule(kappa_min=0.0, kappa_max=0.0, zeta_min=0.1, zeta_max=0.3)
    a, _ = sample_posterior(y, score, sch, guidance=with_m, seed=6)
    b, _ = sample_posterior(y, score, sch, guidance=without, seed=6)
    assert not np.allclose(a, b)


def test_sampler_fourier_measurements():
    side = 8
    sch = linear_schedule(200, 1e-4, 0.02)
    score = GaussianScore(mean=np.zeros((side, side)), variance=0.25, schedule=sch)
    plan = MeasurementPlan(mask=make_fourier_mask(side, FourierStrategy.UNIFORM, 1.0, seed=0))
    target = np.random.default_rng(5).uniform(-0.7, 0.7, (side, side))
    y = apply(plan, target)
    g = GuidanceSchedule(zeta_min=0.5)
    x, trace = sample_posterior(y, score, sch, guidance=g, seed=2)
    assert np.all(np.isfinite(x))
    assert trace.residuals[-1] < trace.residuals[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_sampler_blowup_raises_with_step_context():
    side = 8
    sch = linear_schedule(1000)
    score = GaussianScore(mean=np.zeros((side, side)), variance=1.0, schedule=sch)
    plan = _identity_plan(side)
    y = apply(plan, np.random.default_rng(6).uniform(-1, 1, (side, side)))
    g = GuidanceSchedule(zeta_min=10.0, zeta_max=10.0)  # wildly unstable
    with pytest.raises(NumericalFailure, match=r"t="):
        sample_posterior(y, score, sch, guidance=g, seed=0)


def test_trace_csv_written(tmp_path):
    side = 4
    sch = linear_schedule(20, 1e-3, 0.05)
    score = GaussianScore(mean=np.zeros((side, side)), variance=0.1, schedule=sch)
    plan = _identity_plan(side)
    y = apply(plan, np.zeros((side, side)))
    _, trace = sample_posterior(y, score, sch, seed=0, debug=True)
    p = tmp_path / "trace.csv"
    trace_to_csv(trace, p)
    lines = p.read_text().strip().splitlines()
    assert len(lines) == 21  # header + one row per step
    assert lines[0].split(",")[0] == "t"
