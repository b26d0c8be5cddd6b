import numpy as np
import pytest

from spectra.photometric import (
    HighlightMask,
    RadianceModel,
    combine_bispectral,
    forward_radiance,
    solve_normals,
    specular_free,
)
from spectra.synth import (
    GrooveSpec,
    angular_error,
    dome_lights,
    gen_layered_sphere,
    render_synthetic_stack,
)
from spectra.types import (
    Band,
    BandKind,
    ConfigurationError,
    LightDirection,
    NormalMap,
    SpectralStack,
)

VIS = Band.make("vis", (400, 700), BandKind.VISIBLE_COMBINED)


def stack_from_images(images, lights, label="vis"):
    h, w = images[0].shape
    return SpectralStack(
        width=w, height=h,
        images={(label, i, 0): img for i, img in enumerate(images)},
        bands=[VIS if label == "vis" else Band.make(label, 720, BandKind.NIR)],
        lights=lights,
        exposures={label: [0.5]},
    )


class TestForwardRadiance:
    def test_aligned(self):
        model = RadianceModel()
        out = forward_radiance(model, [0, 0, 1], LightDirection(0, 0, 1))
        assert out == pytest.approx(1.0)

    def test_perpendicular(self):
        model = RadianceModel()
        out = forward_radiance(model, [1, 0, 0], LightDirection(0, 0, 1))
        assert out == pytest.approx(0.0)

    def test_product(self):
        model = RadianceModel(sensitivity=2.0, reflectance=0.5)
        n = np.array([np.sqrt(3) / 2, 0.0, 0.5])
        out = forward_radiance(model, n, LightDirection(0, 0, 1))
        assert out == pytest.approx(0.5)

    def test_attached_shadow_clamped(self):
        out = forward_radiance(RadianceModel(), [0, 0, 1],
                               np.array([0.0, 0.0, -1.0]))
        assert out == 0.0


class TestSpecularFree:
    def test_identical_inputs_returned(self, rng):
        img = 0.2 + 0.6 * rng.random((12, 12))
        out = specular_free(img, img, iterations=3)
        np.testing.assert_allclose(out, img, atol=1e-5)

    def test_saturated_pixel_reduced_to_neighborhood(self):
        s_o = np.full((9, 9), 0.3)
        s_h = s_o.copy()
        s_h[4, 4] = 1.0
        out = specular_free(s_o, s_h, iterations=5)
        assert out[4, 4] == pytest.approx(0.3, abs=1e-4)

    def test_zero_iterations_is_difference_image(self, rng):
        s_o = 0.2 + 0.3 * rng.random((8, 8))
        s_h = s_o + np.abs(rng.random((8, 8))) * 0.3
        out = specular_free(s_o, s_h, iterations=0)
        # log differentiation with positive-part clamping: min(s_h, s_o)
        np.testing.assert_allclose(out, np.minimum(s_h, s_o), atol=1e-5)

    def test_global_max_non_increasing(self, rng):
        s_o = rng.random((10, 10))
        s_h = rng.random((10, 10))
        prev = specular_free(s_o, s_h, iterations=0)
        for it in (1, 2, 4, 8):
            cur = specular_free(s_o, s_h, iterations=it)
            assert cur.max() <= prev.max() + 1e-12
            prev = cur

    def test_output_never_exceeds_input(self, rng):
        s_o = rng.random((10, 10))
        s_h = rng.random((10, 10))
        out = specular_free(s_o, s_h, iterations=3)
        assert np.all(out <= s_h + 1e-6)

    def test_idempotent_on_highlight_free(self, rng):
        img = 0.2 + 0.5 * rng.random((10, 10))
        once = specular_free(img, img, iterations=2)
        twice = specular_free(once, once, iterations=2)
        np.testing.assert_allclose(twice, once, atol=1e-5)


class TestSolveNormals:
    PLANE_LIGHTS = [
        LightDirection.from_vector([1, 0, 1], normalize=True),
        LightDirection.from_vector([0, 1, 1], normalize=True),
        LightDirection(0, 0, 1),
    ]

    def test_plane_recovered_exactly(self):
        n_true = np.array([0.0, 0.0, 1.0])
        images = [
            np.full((6, 6), float(np.clip(n_true @ l.as_array(), 0, None)))
            for l in self.PLANE_LIGHTS
        ]
        stack = stack_from_images(images, self.PLANE_LIGHTS)
        nmap = solve_normals(stack, VIS)
        assert nmap.mask.all()
        np.testing.assert_allclose(
            nmap.normals, np.broadcast_to(n_true, nmap.normals.shape),
            atol=1e-6,
        )

    def test_sphere_round_trip(self):
        """Forward-render oracle: 37 lights, noiseless."""
        scene = gen_layered_sphere(radius_px=48, groove=GrooveSpec(rings=0))
        stack = render_synthetic_stack(scene, dome_lights(),
                                       bands=[VIS])
        nmap = solve_normals(stack, VIS)
        report = angular_error(nmap, scene.outer)
        assert report.mean_deg < 0.1

    def test_fully_masked_pixel_dropped(self):
        images = [np.full((4, 4), 0.6)] * 3
        stack = stack_from_images(images, self.PLANE_LIGHTS)
        masks = {
            ("vis", i): np.zeros((4, 4), dtype=bool) for i in range(3)
        }
        for i in range(3):
            masks[("vis", i)][2, 2] = True
        nmap = solve_normals(stack, VIS, highlight=HighlightMask(masks))
        assert not nmap.mask[2, 2]
        assert nmap.mask[0, 0]
        np.testing.assert_array_equal(nmap.normals[2, 2], 0.0)

    def test_rank_deficient_lights_rejected(self):
        lights = [
            LightDirection.from_vector([1, 0, 1], normalize=True),
            LightDirection.from_vector([2, 0, 2], normalize=True),
            LightDirection.from_vector([0.5, 0, 0.5], normalize=True),
        ]
        images = [np.full((4, 4), 0.5)] * 3
        stack = stack_from_images(images, lights)
        with pytest.raises(ConfigurationError):
            solve_normals(stack, VIS)

    def test_albedo_scale_invariance(self, rng):
        scene = gen_layered_sphere(radius_px=24, groove=GrooveSpec(rings=0))
        stack = render_synthetic_stack(scene, dome_lights(), bands=[VIS])
        n1 = solve_normals(stack, VIS)
        scaled = SpectralStack(
            width=stack.width, height=stack.height,
            images={k: 3.0 * v for k, v in stack.images.items()},
            bands=stack.bands, lights=stack.lights, exposures=stack.exposures,
        )
        n2 = solve_normals(scaled, VIS)
        both = n1.mask & n2.mask
        np.testing.assert_allclose(n2.normals[both], n1.normals[both],
                                   atol=1e-9)
        np.testing.assert_allclose(n2.albedo[both], 3.0 * n1.albedo[both],
                                   rtol=1e-9)

    def test_light_permutation_invariance(self):
        scene = gen_layered_sphere(radius_px=24, groove=GrooveSpec(rings=0))
        stack = render_synthetic_stack(scene, dome_lights(), bands=[VIS])
        n1 = solve_normals(stack, VIS)

        perm = np.arange(len(stack.lights))[::-1]
        images = {}
        for (band, li, ev), img in stack.images.items():
            images[(band, int(np.where(perm == li)[0][0]), ev)] = img
        shuffled = SpectralStack(
            width=stack.width, height=stack.height, images=images,
            bands=stack.bands, lights=[stack.lights[i] for i in perm],
            exposures=stack.exposures,
        )
        n2 = solve_normals(shuffled, VIS)
        both = n1.mask & n2.mask
        np.testing.assert_allclose(n2.normals[both], n1.normals[both],
                                   atol=1e-9)


class TestCombineBispectral:
    def make_maps(self, shape=(6, 6)):
        up = np.zeros(shape + (3,))
        up[..., 2] = 1.0
        tilt = np.zeros(shape + (3,))
        tilt[..., 0] = 0.6
        tilt[..., 2] = 0.8
        ones = np.ones(shape, dtype=bool)
        return (NormalMap(normals=up, mask=ones),
                NormalMap(normals=tilt, mask=ones))

    def test_zero_emission_keeps_visible(self):
        n_vis, n_bis = self.make_maps()
        out = combine_bispectral(n_vis, n_bis, np.zeros((6, 6)))
        np.testing.assert_array_equal(out.normals, n_vis.normals)

    def test_full_emission_uses_bispectral(self):
        n_vis, n_bis = self.make_maps()
        out = combine_bispectral(n_vis, n_bis, np.ones((6, 6)))
        np.testing.assert_array_equal(out.normals, n_bis.normals)

    def test_half_plane_selection_exact(self):
        n_vis, n_bis = self.make_maps()
        emission = np.zeros((6, 6))
        emission[:, 3:] = 1.0
        out = combine_bispectral(n_vis, n_bis, emission, y_th=0.25)
        np.testing.assert_array_equal(out.normals[:, :3], n_vis.normals[:, :3])
        np.testing.assert_array_equal(out.normals[:, 3:], n_bis.normals[:, 3:])

    def test_invalid_bispectral_pixels_fall_back(self):
        n_vis, n_bis = self.make_maps()
        n_bis.mask[2, 2] = False
        out = combine_bispectral(n_vis, n_bis, np.ones((6, 6)))
        np.testing.assert_array_equal(out.normals[2, 2], n_vis.normals[2, 2])
