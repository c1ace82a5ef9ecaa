from __future__ import annotations

from pathlib import Path

import pytest

from hopfbounds.conformal import TrigPoly
from hopfbounds.curves import (Ellipse, GeodesicCircle, RadialGraph, SupportFourier,
                               build_curve)

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def ellipse21():
    return build_curve(Ellipse(2.0, 1.0))


@pytest.fixture(scope="session")
def unit_circle():
    return build_curve(GeodesicCircle(1.0, "flat"))


@pytest.fixture(scope="session")
def perturbed_circle():
    return build_curve(SupportFourier(1.0, ((3, 0.05, 0.02),)))


@pytest.fixture(scope="session")
def sphere_oval():
    return build_curve(RadialGraph("sphere", (0.0, 0.0, 1.0), 0.6, ((2, 0.05, 0.0),)))


@pytest.fixture(scope="session")
def hyperbolic_oval():
    return build_curve(RadialGraph("hyperbolic", (0.0, 0.0, 1.0), 0.5, ((2, 0.03, 0.0),)))


@pytest.fixture(scope="session")
def curves_all(ellipse21, perturbed_circle, sphere_oval, hyperbolic_oval):
    return {"ellipse": ellipse21, "support": perturbed_circle, "sphere": sphere_oval,
            "hyperbolic": hyperbolic_oval}


@pytest.fixture(scope="session")
def cos_factor():
    return TrigPoly(2, 1.0, (((1, 0), 0.3, 0.0),))


@pytest.fixture(scope="session")
def flat_factor():
    return TrigPoly(2, 1.0, ())
