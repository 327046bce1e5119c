import numpy as np
import pytest

from csrecon.forward import (
    Measurement,
    MeasurementPlan,
    add_noise,
    adjoint,
    apply,
    lipschitz_bound,
    measurement_from_bytes,
    measurement_to_bytes,
    zero_filled_inverse,
)
from csrecon.masks import (
    FourierStrategy,
    PixelMaskSet,
    make_fourier_mask,
    make_pixel_masks,
)
from csrecon.transforms import DimensionError


def _pixel_plan(side=16, b=2, kernel=4, seed=0):
    return MeasurementPlan(mask=make_pixel_masks(side=side, b=b, kernel=kernel, seed=seed))


def _fourier_plan(side=16, strategy=FourierStrategy.UNIFORM, compression=2.0, seed=0):
    return MeasurementPlan(mask=make_fourier_mask(side, strategy, compression, seed))


def _dense_matrix(plan):
    """Independent oracle: materialize the operator column by column."""
    side = plan.side
    cols = []
    for i in range(side * side):
        e = np.zeros(side * side)
        e[i] = 1.0
        cols.append(apply(plan, e.reshape(side, side)).data)
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------- pixel path


def test_pixel_apply_hand_values():
    # all-ones mask, K=2 pooling of a ramp: block sums computed by hand
    ones = np.ones((1, 4, 4), dtype=np.uint8)
    plan = MeasurementPlan(mask=PixelMaskSet(side=4, count=1, kernel=2, masks=ones))
    x = np.arange(16, dtype=float).reshape(4, 4)
    y = apply(plan, x)
    assert np.allclose(y.data, [0 + 1 + 4 + 5, 2 + 3 + 6 + 7, 8 + 9 + 12 + 13, 10 + 11 + 14 + 15])


def test_pixel_output_length():
    plan = _pixel_plan(side=128, b=1, kernel=2)
    assert plan.output_dim == 128 * 128 // 4  # m = b*n/K^2 = 4096
    y = apply(plan, np.zeros((128, 128)))
    assert y.data.shape == (4096,)


def test_pixel_identity_plan_is_identity():
    ones = np.ones((1, 8, 8), dtype=np.uint8)
    plan = MeasurementPlan(mask=PixelMaskSet(side=8, count=1, kernel=1, masks=ones))
    x = np.random.default_rng(0).standard_normal((8, 8))
    assert np.allclose(adjoint(plan, apply(plan, x)), x)


# ---------------------------------------------------------------- fourier path


def test_fourier_c1_zero_fill_is_exact():
    plan = _fourier_plan(side=16, compression=1.0)
    x = np.random.default_rng(1).standard_normal((16, 16))
    back = zero_filled_inverse(apply(plan, x))
    assert np.max(np.abs(back - x)) < 1e-10


def test_fourier_composition_is_projector():
    # A* A applied twice equals A* A once (masked-Fourier projection)
    plan = _fourier_plan(side=16, strategy=FourierStrategy.ANNULAR, compression=4.0, seed=3)
    x = np.random.default_rng(2).standard_normal((16, 16))
    p1 = adjoint(plan, apply(plan, x))
    p2 = adjoint(plan, apply(plan, p1))
    assert np.max(np.abs(p2 - p1)) < 1e-8


# ---------------------------------------------------------------- adjointness


@pytest.mark.parametrize("plan_fn", [
    lambda: _pixel_plan(side=16, b=1, kernel=2, seed=1),
    lambda: _pixel_plan(side=16, b=4, kernel=4, seed=2),
    lambda: _fourier_plan(side=16, strategy=FourierStrategy.UNIFORM, compression=2.5),
    lambda: _fourier_plan(side=16, strategy=FourierStrategy.ANNULAR, compression=5.0),
    lambda: _fourier_plan(side=16, strategy=FourierStrategy.RADIAL, compression=5.0),
])
def test_adjoint_identity(plan_fn):
    plan = plan_fn()
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = rng.standard_normal((plan.side, plan.side))
        if plan.is_fourier:
            c = rng.standard_normal(plan.output_dim) + 1j * rng.standard_normal(plan.output_dim)
        else:
            c = rng.standard_normal(plan.output_dim)
        # the adjoint maps back into real images, i.e. it is the transpose of
        # the operator viewed over the reals: Re<c, A x> == <A* c, x>
        lhs = np.vdot(c, apply(plan, x).data).real
        rhs = float(np.sum(adjoint(plan, Measurement(plan=plan, data=c)) * x))
        denom = np.linalg.norm(x) * np.linalg.norm(c)
        assert abs(lhs - rhs) / denom < 1e-8


def test_adjoint_matches_dense_transpose():
    plan = _pixel_plan(side=8, b=2, kernel=2, seed=4)
    A = _dense_matrix(plan)
    rng = np.random.default_rng(6)
    c = rng.standard_normal(plan.output_dim)
    assert np.allclose(adjoint(plan, Measurement(plan=plan, data=c)).ravel(), A.T @ c)


# ---------------------------------------------------------------- linearity


def test_apply_is_linear():
    for plan in (_pixel_plan(), _fourier_plan()):
        rng = np.random.default_rng(7)
        u = rng.standard_normal((16, 16))
        v = rng.standard_normal((16, 16))
        lhs = apply(plan, 2.0 * u - 3.0 * v).data
        rhs = 2.0 * apply(plan, u).data - 3.0 * apply(plan, v).data
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_apply_batch_matches_loop():
    plan = _pixel_plan(side=8, b=2, kernel=2)
    xs = np.random.default_rng(8).standard_normal((5, 8, 8))
    batched = apply(plan, xs)
    for i in range(5):
        assert np.allclose(batched.data[i], apply(plan, xs[i]).data)


# ---------------------------------------------------------------- Lipschitz


def test_lipschitz_fourier_is_one():
    plan = _fourier_plan(side=16, compression=4.0)
    assert lipschitz_bound(plan) == pytest.approx(1.0)


def test_lipschitz_pixel_vs_dense_svd():
    # oracle: largest singular value of the dense matrix, squared
    plan = _pixel_plan(side=8, b=3, kernel=2, seed=9)
    A = _dense_matrix(plan)
    exact = np.linalg.svd(A, compute_uv=False)[0] ** 2
    est = lipschitz_bound(plan)
    assert exact <= est <= exact * 1.05  # upper bound, within 5%


def test_lipschitz_all_ones_pooling():
    # ones mask with K=2: A^T A has largest eigenvalue K^2 = 4
    ones = np.ones((1, 8, 8), dtype=np.uint8)
    plan = MeasurementPlan(mask=PixelMaskSet(side=8, count=1, kernel=2, masks=ones))
    assert lipschitz_bound(plan) == pytest.approx(4.0, rel=0.02)


# ---------------------------------------------------------------- noise


def test_add_noise_zero_variance_is_identity():
    plan = _fourier_plan()
    y = apply(plan, np.random.default_rng(10).standard_normal((16, 16)))
    y2 = add_noise(y, 0.0, seed=0)
    assert np.array_equal(y.data, y2.data)


def test_add_noise_statistics():
    plan = _fourier_plan(side=128, compression=1.0)
    y = apply(plan, np.zeros((128, 128)))
    noisy = add_noise(y, 0.1, seed=1)
    # real and imaginary parts each N(0, 0.1), 16384 samples apiece
    for part in (noisy.data.real, noisy.data.imag):
        assert np.var(part) == pytest.approx(0.1, rel=0.05)
        assert abs(np.mean(part)) < 0.01


def test_add_noise_real_for_pixel_plans():
    plan = _pixel_plan(side=32, b=4, kernel=2)
    y = apply(plan, np.zeros((32, 32)))
    noisy = add_noise(y, 0.1, seed=2)
    assert np.isrealobj(noisy.data)
    assert np.var(noisy.data) == pytest.approx(0.1, rel=0.1)


def test_add_noise_deterministic():
    plan = _pixel_plan()
    y = apply(plan, np.zeros((16, 16)))
    a = add_noise(y, 0.5, seed=3)
    b = add_noise(y, 0.5, seed=3)
    c = add_noise(y, 0.5, seed=4)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


# ---------------------------------------------------------------- validation


def test_measurement_length_validated():
    plan = _pixel_plan()
    with pytest.raises((ValueError, DimensionError)):
        Measurement(plan=plan, data=np.zeros(plan.output_dim + 1))


def test_apply_rejects_wrong_side():
    plan = _pixel_plan(side=16)
    with pytest.raises(DimensionError):
        apply(plan, np.zeros((8, 8)))


# ---------------------------------------------------------------- serialization


def test_measurement_round_trip_bytes():
    for plan in (_pixel_plan(seed=11), _fourier_plan(seed=12)):
        y = apply(plan, np.random.default_rng(13).standard_normal((16, 16)))
        y = add_noise(y, 0.01, seed=14)
        blob = measurement_to_bytes(y)
        back = measurement_from_bytes(blob, plan)
        assert np.array_equal(back.data, y.data)
        assert measurement_to_bytes(back) == blob


def test_measurement_from_bytes_rejects_garbage():
    plan = _pixel_plan()
    y = apply(plan, np.zeros((16, 16)))
    blob = measurement_to_bytes(y)
    with pytest.raises(ValueError):
        measurement_from_bytes(b"XXXX" + blob[4:], plan)
    with pytest.raises(ValueError):
        measurement_from_bytes(blob[:-5], plan)
