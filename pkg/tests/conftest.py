import numpy as np
import pytest
from scipy import ndimage

from spectra.types import LightDirection, NormalMap


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def textured_image(rng):
    """Smooth random blobs with full [0, 1] range; enough texture for NCC."""
    img = ndimage.gaussian_filter(rng.random((96, 96)), 2.5)
    return (img - img.min()) / (img.max() - img.min())


def hemisphere_normals(radius=32, margin=4):
    size = 2 * (radius + margin)
    c = np.arange(size) - (size - 1) / 2
    xx, yy = np.meshgrid(c, c)
    rr2 = xx**2 + yy**2
    inside = rr2 <= (radius - 1) ** 2
    z = np.zeros_like(xx)
    z[inside] = np.sqrt(radius**2 - rr2[inside])
    n = np.zeros(xx.shape + (3,))
    n[inside] = np.stack([xx[inside], yy[inside], z[inside]], axis=-1) / radius
    return NormalMap(normals=n, mask=inside)


@pytest.fixture
def hemisphere():
    return hemisphere_normals()


@pytest.fixture
def flat_normals():
    n = np.zeros((24, 24, 3))
    n[..., 2] = 1.0
    return NormalMap(normals=n, mask=np.ones((24, 24), dtype=bool))


def random_smooth_normals(rng, shape=(32, 32), strength=1.5):
    """Random but smooth unit normal field facing the viewer."""
    p = ndimage.gaussian_filter(rng.standard_normal(shape), 2.0) * strength
    q = ndimage.gaussian_filter(rng.standard_normal(shape), 2.0) * strength
    n = np.stack([p, q, np.ones(shape)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return NormalMap(normals=n, mask=np.ones(shape, dtype=bool))


@pytest.fixture
def zenith():
    return LightDirection(0.0, 0.0, 1.0)
