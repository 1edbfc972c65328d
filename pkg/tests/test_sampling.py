import numpy as np
import pytest

from darcs.sampling import (
    MaskConfig,
    SplitMix64,
    center_slices,
    generate_poisson_mask,
    mask_acceleration,
)


def test_splitmix64_reference_stream():
    # first outputs for seed 0 of the reference C implementation
    g = SplitMix64(0)
    assert [g.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F,
    ]


def test_splitmix64_bounded_and_permutation():
    g = SplitMix64(42)
    draws = [g.bounded(7) for _ in range(2000)]
    assert min(draws) == 0 and max(draws) == 6
    perm = SplitMix64(5).permutation(50)
    assert sorted(perm) == list(range(50))
    assert perm == SplitMix64(5).permutation(50)


def test_full_sampling():
    m = generate_poisson_mask(MaskConfig(16, 8, 1, (4, 4)))
    assert m.mask.all() and m.acceleration == 1.0


def test_center_and_acceleration():
    cfg = MaskConfig(64, 32, 4, (8, 8), seed=3)
    m = generate_poisson_mask(cfg)
    zs, ys = center_slices(64, 32, (8, 8))
    assert m.mask[zs, ys].all()
    assert abs(mask_acceleration(m.mask) / 4 - 1) <= 0.05


def test_min_distance_outside_center():
    m = generate_poisson_mask(MaskConfig(64, 32, 6, (8, 8), seed=9))
    periph = m.mask.copy()
    periph[center_slices(64, 32, (8, 8))] = False
    pts = np.argwhere(periph).astype(float)
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    np.fill_diagonal(d, np.inf)
    assert d.min() >= m.r_min - 1e-12


def test_determinism_and_seed_dependence():
    a = generate_poisson_mask(MaskConfig(40, 20, 5, (6, 6), seed=1)).mask
    b = generate_poisson_mask(MaskConfig(40, 20, 5, (6, 6), seed=1)).mask
    c = generate_poisson_mask(MaskConfig(40, 20, 5, (6, 6), seed=2)).mask
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("kwargs", [
    dict(ny=16, nz=8, accel=0.5),
    dict(ny=16, nz=8, accel=2, center=(20, 4)),
    dict(ny=16, nz=8, accel=2, center=(4, -1)),
    dict(ny=0, nz=8, accel=2),
])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        MaskConfig(**kwargs)
