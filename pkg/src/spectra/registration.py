"""Cross-band alignment: robust selective NCC matching with a global
similarity stage, per-pixel residual flow, and a normal-safe warp that
relocates normal vectors without interpolating them."""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy import ndimage

from .types import (
    NormalMap,
    ParameterError,
    SpectraError,
    StructuralError,
    normalize_normals,
)


@dataclass
class RsnccParams:
    patch_radius: int = 5
    tau: float = 0.5  # gradient-term weight
    lambda1: float = 0.1  # flow smoothness
    lambda2: float = 0.05  # pairwise displacement penalty
    pyramid_levels: int = 4
    pyramid_scale: float = 0.5
    charbonnier_eps: float = 1e-3
    max_residual: float = 0.8
    grid_translation_px: float = 12.0
    grid_rotation_deg: float = 6.0
    sample_stride: int = 6

    def __post_init__(self):
        for name in ("patch_radius", "tau", "lambda1", "lambda2",
                     "pyramid_levels", "charbonnier_eps"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")


@dataclass
class Homography:
    """3x3 transform mapping band coordinates into the visible reference."""

    matrix: np.ndarray
    residual: float = float("nan")

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(3, 3)
        if abs(np.linalg.det(self.matrix)) <= 1e-9:
            raise ParameterError("homography is not invertible")

    def affine(self) -> np.ndarray:
        """Perspective row zeroed: the normal-safe variant of the transform."""
        h = self.matrix / self.matrix[2, 2]
        out = h.copy()
        out[2] = (0.0, 0.0, 1.0)
        return out

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


@dataclass
class DisplacementField:
    """Per-pixel displacement (u, v) mapping reference pixels into the
    globally aligned band image."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise StructuralError("u/v shape mismatch")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise StructuralError("displacement field must be finite")

    @classmethod
    def zero(cls, shape) -> "DisplacementField":
        return cls(u=np.zeros(shape), v=np.zeros(shape))


class AlignmentError(SpectraError):
    """Alignment did not converge; carries the best-effort transform."""

    def __init__(self, message: str, homography: Homography):
        super().__init__(message)
        self.homography = homography


def charbonnier(x: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Robust penalty sqrt(x^2 + eps^2) - eps; zero at zero."""
    return np.sqrt(x * x + eps * eps) - eps


# --------------------------------------------------------------------------
# Composite image
# --------------------------------------------------------------------------

def composite_image(stack, band) -> np.ndarray:
    """80th-percentile intensity per pixel across the multilight stack at
    EV0, which suppresses cast shadows before matching."""
    from .color import luminance

    label = band.label if hasattr(band, "label") else band
    lights = stack.light_indices(label)
    if not lights:
        raise ParameterError(f"band {label!r} has no lights")
    cube = np.stack(
        [luminance(stack.image(label, li, 0)) for li in lights], axis=0
    )
    return np.percentile(cube, 80, axis=0, method="linear")


# --------------------------------------------------------------------------
# RSNCC cost
# --------------------------------------------------------------------------

def _patch_ncc(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Normalized cross correlation along the last axis; zero-variance
    patches correlate at 0 (worst)."""
    a = a - a.mean(axis=-1, keepdims=True)
    b = b - b.mean(axis=-1, keepdims=True)
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    denom = na * nb
    out = np.zeros(denom.shape)
    ok = denom > 1e-12
    out[ok] = np.sum(a * b, axis=-1)[ok] / denom[ok]
    return out


def _gradients(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gy, gx = np.gradient(np.asarray(image, dtype=np.float64))
    return gx, gy


def _sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    return ndimage.map_coordinates(image, [ys, xs], order=1, mode="reflect")


def rsncc_costs(
    ref: np.ndarray,
    mov: np.ndarray,
    points: np.ndarray,
    transform: np.ndarray,
    params: RsnccParams,
    mov_grads: tuple[np.ndarray, np.ndarray] | None = None,
    ref_grads: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Matching cost at many points under one affine transform.

    The reference patch at each point is compared against the moving-image
    patch sampled at the transformed patch coordinates; intensity and
    gradient NCC combine under the robust penalty.
    """
    r = params.patch_radius
    offs = np.arange(-r, r + 1)
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    ox = ox.ravel()[None, :]
    oy = oy.ravel()[None, :]

    px = points[:, 0][:, None] + ox
    py = points[:, 1][:, None] + oy
    ref_patch = _sample(ref, px.ravel(), py.ravel()).reshape(px.shape)

    tx = transform[0, 0] * px + transform[0, 1] * py + transform[0, 2]
    ty = transform[1, 0] * px + transform[1, 1] * py + transform[1, 2]
    mov_patch = _sample(mov, tx.ravel(), ty.ravel()).reshape(px.shape)

    phi_i = np.abs(_patch_ncc(ref_patch, mov_patch))

    if ref_grads is None:
        ref_grads = _gradients(ref)
    if mov_grads is None:
        mov_grads = _gradients(mov)
    rgx = _sample(ref_grads[0], px.ravel(), py.ravel()).reshape(px.shape)
    rgy = _sample(ref_grads[1], px.ravel(), py.ravel()).reshape(px.shape)
    mgx = _sample(mov_grads[0], tx.ravel(), ty.ravel()).reshape(px.shape)
    mgy = _sample(mov_grads[1], tx.ravel(), ty.ravel()).reshape(px.shape)
    phi_g = np.abs(
        _patch_ncc(
            np.concatenate([rgx, rgy], axis=1),
            np.concatenate([mgx, mgy], axis=1),
        )
    )

    eps = params.charbonnier_eps
    return charbonnier(1.0 - phi_i, eps) + params.tau * charbonnier(1.0 - phi_g, eps)


def rsncc_cost(
    i1: np.ndarray,
    i2: np.ndarray,
    p: tuple[int, int],
    w_p: tuple[float, float] = (0.0, 0.0),
    params: RsnccParams | None = None,
) -> float:
    """Single-pixel matching cost between a patch at p in i1 and the patch
    displaced by w_p in i2."""
    params = params or RsnccParams()
    transform = np.array(
        [[1.0, 0.0, w_p[0]], [0.0, 1.0, w_p[1]], [0.0, 0.0, 1.0]]
    )
    pts = np.array([[float(p[0]), float(p[1])]])
    return float(rsncc_costs(np.asarray(i1, dtype=np.float64),
                             np.asarray(i2, dtype=np.float64),
                             pts, transform, params)[0])


# --------------------------------------------------------------------------
# Global alignment
# --------------------------------------------------------------------------

def _similarity_matrix(tx: float, ty: float, theta_deg: float, scale: float,
                       center: tuple[float, float]) -> np.ndarray:
    """Similarity transform about the image center."""
    th = np.deg2rad(theta_deg)
    c, s = scale * np.cos(th), scale * np.sin(th)
    cx, cy = center
    m = np.array(
        [
            [c, -s, tx + cx - c * cx + s * cy],
            [s, c, ty + cy - s * cx - c * cy],
            [0.0, 0.0, 1.0],
        ]
    )
    return m


def _sample_points(shape, margin: int, stride: int) -> np.ndarray:
    h, w = shape
    xs = np.arange(margin, w - margin, stride)
    ys = np.arange(margin, h - margin, stride)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1).astype(np.float64)


def _resize(image: np.ndarray, scale: float) -> np.ndarray:
    if scale == 1.0:
        return image
    h, w = image.shape
    return cv2.resize(
        image, (max(8, int(round(w * scale))), max(8, int(round(h * scale)))),
        interpolation=cv2.INTER_AREA,
    )


def global_align(
    i_lambda: np.ndarray,
    i_vis: np.ndarray,
    params: RsnccParams | None = None,
) -> Homography:
    """Estimate the homography mapping a band composite onto the visible
    reference by minimizing summed RSNCC cost over a coarse-to-fine pyramid.

    A translation/rotation grid search at the coarsest level seeds a
    deterministic pattern-search refinement of the similarity parameters at
    every level. Raises AlignmentError (carrying the best-effort transform)
    if the final residual stays above params.max_residual.
    """
    params = params or RsnccParams()
    ref = np.asarray(i_vis, dtype=np.float64)
    mov = np.asarray(i_lambda, dtype=np.float64)
    if ref.ndim != 2 or mov.ndim != 2:
        raise ParameterError("global_align expects single-channel images")

    scales = [params.pyramid_scale ** (params.pyramid_levels - 1 - i)
              for i in range(params.pyramid_levels)]
    # parameters of T: vis -> lambda (pull-back sampling)
    tx = ty = theta = 0.0
    log_s = 0.0
    state = None

    for level, scale in enumerate(scales):
        ref_l = _resize(ref, scale)
        mov_l = _resize(mov, scale)
        mg = _gradients(mov_l)
        rg = _gradients(ref_l)
        margin = params.patch_radius + 2
        stride = max(2, int(round(params.sample_stride * max(scale, 0.25))))
        pts = _sample_points(ref_l.shape, margin, stride)
        if len(pts) < 9:
            pts = _sample_points(ref_l.shape, 2, 2)
        center = ((ref_l.shape[1] - 1) / 2.0, (ref_l.shape[0] - 1) / 2.0)

        def cost(ptx, pty, pth, pls):
            t = _similarity_matrix(ptx, pty, pth, np.exp(pls), center)
            return float(
                np.mean(rsncc_costs(ref_l, mov_l, pts, t, params,
                                    mov_grads=mg, ref_grads=rg))
            )

        if level == 0:
            best = (np.inf, 0.0, 0.0, 0.0)
            t_range = params.grid_translation_px * scale
            t_step = max(1.0, t_range / 6.0)
            for gtx in np.arange(-t_range, t_range + 1e-9, t_step):
                for gty in np.arange(-t_range, t_range + 1e-9, t_step):
                    for gth in np.arange(-params.grid_rotation_deg,
                                         params.grid_rotation_deg + 1e-9, 1.5):
                        c = cost(gtx, gty, gth, 0.0)
                        if c < best[0]:
                            best = (c, gtx, gty, gth)
            tx, ty, theta = best[1], best[2], best[3]
        else:
            ratio = scale / scales[level - 1]
            tx *= ratio
            ty *= ratio

        # pattern search over (tx, ty, theta, log_s)
        steps = np.array([1.0, 1.0, 0.5, 0.01])
        floor = np.array([0.02, 0.02, 0.01, 5e-4])
        vec = np.array([tx, ty, theta, log_s])
        current = cost(*vec)
        while np.any(steps > floor):
            improved = False
            for i in range(4):
                if steps[i] <= floor[i] * 0.5:
                    continue
                for sign in (1.0, -1.0):
                    trial = vec.copy()
                    trial[i] += sign * steps[i]
                    c = cost(*trial)
                    if c < current - 1e-12:
                        vec, current = trial, c
                        improved = True
            if not improved:
                steps *= 0.5
        tx, ty, theta, log_s = vec
        state = current

    # T maps vis -> lambda at full resolution; H = T^-1 maps lambda -> vis
    center = ((ref.shape[1] - 1) / 2.0, (ref.shape[0] - 1) / 2.0)
    t_full = _similarity_matrix(tx, ty, theta, np.exp(log_s), center)
    h = Homography(matrix=np.linalg.inv(t_full), residual=float(state))
    if state > params.max_residual:
        raise AlignmentError(
            f"global alignment residual {state:.4f} exceeds "
            f"{params.max_residual}", h
        )
    return h


# --------------------------------------------------------------------------
# Local alignment
# --------------------------------------------------------------------------

def _local_normalize(image: np.ndarray, radius: int) -> np.ndarray:
    size = 2 * radius + 1
    mean = ndimage.uniform_filter(image, size=size, mode="nearest")
    sq = ndimage.uniform_filter(image * image, size=size, mode="nearest")
    std = np.sqrt(np.clip(sq - mean * mean, 0.0, None))
    return (image - mean) / (std + 1e-3)


def _warp_by_field(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = image.shape
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    return ndimage.map_coordinates(image, [gy + v, gx + u], order=1,
                                   mode="reflect")


def warp_image(image: np.ndarray, h: Homography,
               output_shape=None) -> np.ndarray:
    """Bilinear warp of an intensity image into the reference frame."""
    out_shape = output_shape or image.shape[:2]
    inv = h.inverse()
    gy, gx = np.mgrid[0:out_shape[0], 0:out_shape[1]].astype(np.float64)
    denom = inv[2, 0] * gx + inv[2, 1] * gy + inv[2, 2]
    sx = (inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]) / denom
    sy = (inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]) / denom
    return ndimage.map_coordinates(np.asarray(image, dtype=np.float64),
                                   [sy, sx], order=1, mode="constant", cval=0.0)


def local_align(
    i_lambda: np.ndarray,
    i_vis: np.ndarray,
    h: Homography | None = None,
    params: RsnccParams | None = None,
    warp_iterations: int = 3,
    solver_iterations: int = 60,
) -> DisplacementField:
    """Pixel-wise residual displacement after global alignment.

    Both images are transformed to locally normalized correlation space
    (which also absorbs intensity inversion via a global sign fix), then a
    coarse-to-fine iteratively reweighted least-squares flow minimizes the
    robust data term plus the gradient-smoothness and pairwise
    displacement penalties.
    """
    params = params or RsnccParams()
    ref = np.asarray(i_vis, dtype=np.float64)
    mov = np.asarray(i_lambda, dtype=np.float64)
    if h is not None:
        mov = warp_image(mov, h, output_shape=ref.shape)

    radius = params.patch_radius
    ln_ref = _local_normalize(ref, radius)
    ln_mov = _local_normalize(mov, radius)
    corr = float(np.mean(ln_ref * ln_mov))
    if corr < 0:
        ln_mov = -ln_mov

    eps = params.charbonnier_eps
    eps_smooth = 1e-2
    eps_pair = 1e-2

    scales = [params.pyramid_scale ** (params.pyramid_levels - 1 - i)
              for i in range(params.pyramid_levels)]
    u = v = None
    for scale in scales:
        r_l = _resize(ln_ref, scale)
        m_l = _resize(ln_mov, scale)
        hgt, wid = r_l.shape
        if u is None:
            u = np.zeros((hgt, wid))
            v = np.zeros((hgt, wid))
        else:
            ratio_x = wid / u.shape[1]
            ratio_y = hgt / u.shape[0]
            u = cv2.resize(u, (wid, hgt), interpolation=cv2.INTER_LINEAR) * ratio_x
            v = cv2.resize(v, (wid, hgt), interpolation=cv2.INTER_LINEAR) * ratio_y

        for _ in range(warp_iterations):
            warped = _warp_by_field(m_l, u, v)
            gy, gx = np.gradient(warped)
            it0 = warped - r_l
            # linearize around the current field
            c = it0 - gx * u - gy * v
            for _ in range(solver_iterations):
                res = gx * u + gy * v + c
                wd = 1.0 / (2.0 * np.sqrt(res * res + eps * eps))

                du_y, du_x = np.gradient(u)
                dv_y, dv_x = np.gradient(v)
                g2 = du_x**2 + du_y**2 + dv_x**2 + dv_y**2
                ws = 1.0 / (2.0 * np.sqrt(g2 + eps_smooth**2))

                s_sum = np.zeros_like(u)
                u_sum = np.zeros_like(u)
                v_sum = np.zeros_like(u)
                for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
                    un = np.roll(u, shift, axis=axis)
                    vn = np.roll(v, shift, axis=axis)
                    wsn = np.roll(ws, shift, axis=axis)
                    diff = np.sqrt((u - un) ** 2 + (v - vn) ** 2)
                    nu = (params.lambda1 * 0.5 * (ws + wsn)
                          + params.lambda2 / (diff + eps_pair))
                    # clamp rolled-over border edges
                    sl = [slice(None), slice(None)]
                    sl[axis] = slice(0, 1) if shift == 1 else slice(-1, None)
                    nu[tuple(sl)] = 0.0
                    s_sum += nu
                    u_sum += nu * un
                    v_sum += nu * vn

                a11 = s_sum + wd * gx * gx
                a12 = wd * gx * gy
                a22 = s_sum + wd * gy * gy
                b1 = u_sum - wd * gx * c
                b2 = v_sum - wd * gy * c
                det = a11 * a22 - a12 * a12
                det = np.where(det < 1e-12, 1e-12, det)
                u = (a22 * b1 - a12 * b2) / det
                v = (a11 * b2 - a12 * b1) / det

    return DisplacementField(u=u, v=v)


# --------------------------------------------------------------------------
# Normal-safe warping
# --------------------------------------------------------------------------

def warp_normal_map(
    n_lambda: NormalMap,
    h: Homography | None = None,
    disp_field: DisplacementField | None = None,
    fill_holes: bool = False,
) -> NormalMap:
    """Relocate normals into the reference frame without interpolating them.

    Positions move by the affine part of the homography followed by the
    local displacement correction; vectors are copied verbatim. Target
    collisions keep the source with the smaller displacement magnitude;
    unreached pixels are masked out. Optional hole filling averages valid
    3x3 neighbors in slope space and renormalizes.
    """
    src = n_lambda
    hgt, wid = src.mask.shape
    ys, xs = np.nonzero(src.mask)
    if len(xs) == 0:
        return src.copy()

    fx = xs.astype(np.float64)
    fy = ys.astype(np.float64)
    if h is not None:
        a = h.affine()
        tx = a[0, 0] * fx + a[0, 1] * fy + a[0, 2]
        ty = a[1, 0] * fx + a[1, 1] * fy + a[1, 2]
    else:
        tx, ty = fx.copy(), fy.copy()

    if disp_field is not None:
        du = ndimage.map_coordinates(disp_field.u, [ty, tx], order=1,
                                     mode="constant", cval=0.0)
        dv = ndimage.map_coordinates(disp_field.v, [ty, tx], order=1,
                                     mode="constant", cval=0.0)
        tx = tx - du
        ty = ty - dv

    ix = np.round(tx).astype(np.intp)
    iy = np.round(ty).astype(np.intp)
    inb = (ix >= 0) & (ix < wid) & (iy >= 0) & (iy < hgt)
    ix, iy = ix[inb], iy[inb]
    sx, sy = xs[inb], ys[inb]
    dist = np.hypot(tx[inb] - sx, ty[inb] - sy)

    order = np.lexsort((np.arange(len(dist)), dist))
    lin = iy[order] * wid + ix[order]
    _, first = np.unique(lin, return_index=True)
    sel = order[first]

    normals = np.zeros_like(src.normals)
    mask = np.zeros_like(src.mask)
    normals[iy[sel], ix[sel]] = src.normals[sy[sel], sx[sel]]
    mask[iy[sel], ix[sel]] = True

    if fill_holes:
        normals, mask = _fill_holes_slope_space(normals, mask)

    return NormalMap(normals=normals, mask=mask, band=src.band)


def _fill_holes_slope_space(normals: np.ndarray, mask: np.ndarray):
    """Fill interior holes by averaging valid neighbors in slope space."""
    from .pyramid import normals_to_slopes, slopes_to_normals

    filled = ndimage.binary_fill_holes(mask)
    holes = filled & ~mask
    if not holes.any():
        return normals, mask
    p, q = normals_to_slopes(normals)
    m = mask.astype(np.float64)
    kernel = np.ones((3, 3))
    weight = ndimage.convolve(m, kernel, mode="constant")
    p_avg = ndimage.convolve(p * m, kernel, mode="constant")
    q_avg = ndimage.convolve(q * m, kernel, mode="constant")
    can_fill = holes & (weight > 0)
    p_new = np.where(can_fill, p_avg / np.maximum(weight, 1e-12), p)
    q_new = np.where(can_fill, q_avg / np.maximum(weight, 1e-12), q)
    rebuilt = slopes_to_normals(p_new, q_new)
    out = normals.copy()
    out[can_fill] = rebuilt[can_fill]
    return out, mask | can_fill
