import numpy as np
import pytest

from wedgelab import ConeGeometry
from wedgelab.errors import ArgumentError


def test_sector_rays_and_membership():
    sec = ConeGeometry.sector(np.pi / 2, np.pi / 4)
    lo, hi = sec.ray_angles()
    assert lo == pytest.approx(0.0, abs=1e-15) and hi == pytest.approx(np.pi / 2)
    inside = sec.contains(np.array([[0.3, 0.4], [-0.1, 0.5], [0.5, -0.01]]))
    assert inside.tolist() == [True, False, False]


def test_crack_contains_everything_off_the_slit():
    crack = ConeGeometry.sector(2 * np.pi)
    pts = np.array([[1.0, 0.2], [-1.0, 0.01], [-1.0, -0.01]])
    assert crack.contains(pts).all()


@pytest.mark.parametrize("kw", [dict(m=2, theta=0.0), dict(m=2, theta=7.0), dict(m=3, theta=np.pi),
                                dict(m=4, theta=1.0), dict(m=2, theta=1.0, orientation=(1.0, 1.0)),
                                dict(m=3, theta=1.0, n=2)])
def test_rejects_bad_cones(kw):
    with pytest.raises(ArgumentError):
        ConeGeometry(**kw)


def test_dict_roundtrip():
    c = ConeGeometry(m=3, theta=0.7, n=5)
    assert ConeGeometry.from_dict(c.to_dict()) == c


def test_acute():
    assert ConeGeometry.sector(3.0).is_acute()
    assert not ConeGeometry.sector(np.pi).is_acute()
    assert ConeGeometry(m=3, theta=1.0).is_acute()
