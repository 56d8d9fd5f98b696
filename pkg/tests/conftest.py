import math

import numpy as np
import pytest

from patchdyn.geometry import Contour, Patch


def regular_polygon(n: int, r: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    th = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([center[0] + r * np.cos(th),
                            center[1] + r * np.sin(th)])


def disk_patch(r: float = 1.0, n: int = 256, center=(0.0, 0.0),
               equal_area: bool = True) -> Patch:
    """Polygonal disk; with equal_area the polygon area is exactly pi r^2."""
    v = regular_polygon(n, r)
    if equal_area:
        v *= math.sqrt(math.pi * r * r / (0.5 * n * math.sin(2 * math.pi / n) * r * r))
    return Patch(Contour(v + np.asarray(center), check_simple=False))


def ellipse_patch(a: float, b: float, n: int = 256) -> Patch:
    th = 2.0 * math.pi * np.arange(n) / n
    v = np.column_stack([a * np.cos(th), b * np.sin(th)])
    area = 0.5 * abs(float(np.sum(v[:, 0] * np.roll(v[:, 1], -1)
                                  - np.roll(v[:, 0], -1) * v[:, 1])))
    v *= math.sqrt(math.pi * a * b / area)
    return Patch(Contour(v, check_simple=False))


def random_star_polygon(rng: np.random.Generator, n: int = 128) -> np.ndarray:
    """Simple star-shaped polygon with mild random radius modulation."""
    th = 2.0 * math.pi * np.arange(n) / n
    r = 1.0 + 0.25 * np.cos(3 * th + rng.uniform(0, 2 * math.pi)) \
        + 0.1 * np.cos(5 * th + rng.uniform(0, 2 * math.pi)) \
        + rng.uniform(0.8, 1.2) - 1.0
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
