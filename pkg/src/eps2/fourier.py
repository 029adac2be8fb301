"""Fourier identities for smoothed square functions of Lipschitz graphs.

Functions are sampled on a uniform grid of a window of R^n (n = 1 or 2).
The left-hand sides are computed in physical space (sampled kernels,
convolutions through the DFT of a zero-padded grid, Fourier shifts); the
constants come from one-dimensional quadrature of the radial profile
transform.  The two routes share no intermediate quantity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import j0

from .coefficients import Kernel, _gauss_panels
from .dini import log_grid, log_trapezoid

FACTOR = 2.0 ** 0.125


# ---------------------------------------------------------------------------
# sampled functions


@dataclass
class GridFunction:
    """Samples of f on the cell-centred grid origin + (k + 1/2) spacing, k < N, per axis."""

    values: np.ndarray
    spacing: float
    origin: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim not in (1, 2):
            raise ValueError("only n = 1 or n = 2 grids are supported")
        if len(set(self.values.shape)) != 1:
            raise ValueError("grid must be square")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite samples")

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def window(self) -> float:
        return self.N * self.spacing

    @property
    def axis(self) -> np.ndarray:
        return self.origin + (np.arange(self.N) + 0.5) * self.spacing

    def gradient(self) -> list[np.ndarray]:
        g = np.gradient(self.values, self.spacing, edge_order=2)
        return [g] if self.n == 1 else list(g)

    @property
    def slope(self) -> float:
        """Largest finite-difference gradient norm."""
        g = self.gradient()
        return float(np.sqrt(np.max(sum(c * c for c in g))))

    def grad_norm2(self) -> float:
        """||grad f||_2^2 by central differences."""
        return float(sum(np.sum(c * c) for c in self.gradient()) * self.spacing ** self.n)

    def margin_ok(self, frac: float = 0.1) -> bool:
        """Samples vanish (to 1e-12 relative) within ``frac`` of the window edges."""
        k = max(1, int(frac * self.N))
        v = np.abs(self.values)
        top = max(float(v.max()), 1e-300)
        edge = [v[:k], v[-k:]] if self.n == 1 else [v[:k], v[-k:], v[:, :k], v[:, -k:]]
        return max(float(e.max()) for e in edge) <= 1e-12 * top

    def scaled(self, lam: float) -> "GridFunction":
        return GridFunction(lam * self.values, self.spacing, self.origin)

    def rolled(self, cells: int) -> "GridFunction":
        """Translate by a whole number of cells (the margin keeps the support inside)."""
        return GridFunction(np.roll(self.values, cells, axis=tuple(range(self.n))), self.spacing, self.origin)

    def with_slope(self, s: float) -> "GridFunction":
        return self.scaled(s / self.slope)

    def spline(self):
        """Cubic interpolant of the samples, zero outside the window."""
        if self.n != 1:
            raise ValueError("spline evaluation is one-dimensional")
        sp = CubicSpline(self.axis, self.values, bc_type="natural", extrapolate=False)
        return lambda x: np.nan_to_num(sp(x), nan=0.0)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.values.reshape(self.N, -1), delimiter=",",
                   header=f"spacing={self.spacing!r},origin={self.origin!r},n={self.n}")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path) as fh:
            head = fh.readline().lstrip("# ").strip()
        meta = dict(item.split("=") for item in head.split(","))
        v = np.loadtxt(path, delimiter=",", ndmin=2)
        if int(meta["n"]) == 1:
            v = v.ravel()
        return cls(v, float(meta["spacing"]), float(meta["origin"]))


def _grid(N: int, window: float, n: int):
    h = window / N
    x = -0.5 * window + (np.arange(N) + 0.5) * h
    if n == 1:
        return h, x
    X, Y = np.meshgrid(x, x, indexing="ij")
    return h, np.hypot(X, Y)


def _bump(t):
    t = np.asarray(t, float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
    return out


def bump_function(N: int = 2 ** 14, window: float = 8.0, width: float = 2.5, slope: float = 0.1,
                  n: int = 1) -> GridFunction:
    """exp(1 - 1/(1 - |x/width|^2)) rescaled to the requested slope."""
    h, x = _grid(N, window, n)
    f = GridFunction(_bump(np.abs(x) / width), h, -0.5 * window)
    return f.with_slope(slope)


def smoothed_tent(N: int = 2 ** 14, window: float = 8.0, half_width: float = 2.0, smooth: float = 0.5,
                  slope: float = 0.1, n: int = 1) -> GridFunction:
    """Tent max(0, 1 - |x|/half_width) convolved with a normalized bump of radius ``smooth``."""
    h, x = _grid(N, window, n)
    tent = np.maximum(0.0, 1.0 - np.abs(x) / half_width)
    k = _bump(np.abs(x) / smooth)
    k /= k.sum()
    v = _fft_conv(tent, k)
    v[np.abs(x) >= half_width + smooth] = 0.0
    return GridFunction(v, h, -0.5 * window).with_slope(slope)


def random_lipschitz(seed: int, N: int = 2 ** 14, window: float = 8.0, knots: int = 12, radius: float = 2.5,
                     smooth: float = 0.3, slope: float = 0.1) -> GridFunction:
    """Random piecewise-linear profile on [-radius, radius], tapered and mollified (n = 1)."""
    rng = np.random.default_rng(seed)
    h, x = _grid(N, window, 1)
    kx = np.linspace(-radius + smooth, radius - smooth, knots)
    ky = rng.uniform(-1.0, 1.0, knots)
    ky[0] = ky[-1] = 0.0
    v = np.interp(x, kx, ky, left=0.0, right=0.0)
    k = _bump(np.abs(x) / smooth)
    k /= k.sum()
    v = _fft_conv(v, k)
    v[np.abs(x) >= radius] = 0.0
    return GridFunction(v, h, -0.5 * window).with_slope(slope)


def _rfft(a, pad):
    return np.fft.rfftn(a, pad, axes=tuple(range(len(pad))))


def _irfft(a, pad):
    return np.fft.irfftn(a, pad, axes=tuple(range(len(pad))))


def _fft_conv(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Linear convolution of same-shape arrays with ``k`` centred on the grid."""
    pad = tuple(2 * s for s in a.shape)
    out = _irfft(_rfft(a, pad) * _rfft(_centre_kernel(k, pad), pad), pad)
    return out[tuple(slice(0, s) for s in a.shape)]


def _centre_kernel(k: np.ndarray, pad) -> np.ndarray:
    """Zero-padded copy of a grid-centred kernel rolled so its centre sits at index 0."""
    kp = np.zeros(pad)
    kp[tuple(slice(0, s) for s in k.shape)] = k
    shift = tuple(-(s // 2) for s in k.shape)
    return np.roll(kp, shift, axis=tuple(range(k.ndim)))


def plancherel_gate(f: GridFunction) -> float:
    """Relative mismatch between sum |f|^2 and the DFT energy."""
    e = float(np.sum(f.values ** 2))
    F = np.fft.fftn(f.values)
    ef = float(np.sum(np.abs(F) ** 2)) / f.values.size
    return abs(e - ef) / max(e, 1e-300)


# ---------------------------------------------------------------------------
# profile transforms


def _s_nodes(kernel: Kernel, t_max: float, depth: int, dilation: float):
    S = kernel.support * dilation
    panels = depth * max(128, int(math.ceil(8 * S * t_max)))
    s, w = _gauss_panels(0.0, S, panels)
    prof = kernel.profile(s / dilation)
    return s, w, prof


def profile_transform(kernel: Kernel, t, n: int = 1, depth: int = 1, dilation: float = 1.0):
    """Radial transform phi_hat(t) of phi(x) = profile(|x| / dilation) on R^n and phi_hat(t) - phi_hat(0).

    The difference is evaluated without cancellation: in one dimension as
    -4 int phi(s) sin^2(pi s t) ds, in two dimensions with a series for
    J0 - 1 at small arguments.
    """
    t = np.atleast_1d(np.asarray(t, float))
    s, w, prof = _s_nodes(kernel, float(t.max(initial=1.0)), depth, dilation)
    hat0 = 2.0 * float(np.sum(w * prof)) if n == 1 else 2 * math.pi * float(np.sum(w * prof * s))
    delta = np.empty_like(t)
    for a in range(0, len(t), 256):
        tt = t[a:a + 256, None]
        if n == 1:
            delta[a:a + 256] = -4.0 * np.sum(w * prof * np.sin(math.pi * s * tt) ** 2, axis=1)
        else:
            x = 2 * math.pi * s * tt
            small = x < 1e-2
            jm1 = np.where(small, -x ** 2 / 4 + x ** 4 / 64 - x ** 6 / 2304, j0(x) - 1.0)
            delta[a:a + 256] = 2 * math.pi * np.sum(w * prof * s * jm1, axis=1)
    return hat0 + delta, delta, hat0


def _t_nodes(kernel: Kernel, depth: int, dilation: float, T: float):
    S = kernel.support * dilation
    edges = [0.0, 1e-3 / S]
    while edges[-1] < 2.0 / S:
        edges.append(edges[-1] * 2 ** (1.0 / depth))
    step = 0.125 / (S * depth)
    edges.extend(np.arange(edges[-1] + step, T + 0.5 * step, step).tolist())
    t, w = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ti, wi = _gauss_panels(a, b, 1)
        t.append(ti)
        w.append(wi)
    return np.concatenate(t), np.concatenate(w)


def plancherel_constant(kernel: Kernel | None = None, n: int = 1, depth: int = 1, dilation: float = 1.0,
                        T: float | None = None) -> float:
    """c with int int |(f * phi_r - c(phi) f) / r|^2 dr/r dx = c ||grad f||^2.

    c = (4 pi^2)^-1 int_0^inf |phi_hat(t) - phi_hat(0)|^2 dt / t^3.  The
    integral is truncated at T (default 100 / support) and completed with
    phi_hat(0)^2 / (2 T^2), the limit of the integrand beyond T.
    """
    kernel = kernel or Kernel("bump")
    S = kernel.support * dilation
    T = T or 100.0 / S
    t, w = _t_nodes(kernel, depth, dilation, T)
    _, delta, hat0 = profile_transform(kernel, t, n, depth, dilation)
    K = float(np.sum(w * delta ** 2 / t ** 3)) + hat0 ** 2 / (2 * T ** 2)
    return K / (4 * math.pi ** 2)


def _x_minus_sin(x):
    return np.where(np.abs(x) < 1e-2, x ** 3 / 6 - x ** 5 / 120 + x ** 7 / 5040, x - np.sin(x))


def second_diff_constant(kernel: Kernel | None = None, n: int = 1, depth: int = 1, T: float | None = None) -> float:
    """c' of the second-difference identity with phi normalized to unit mass.

    c' = I / (4 pi^2), I = int_0^inf int_{|y| <= t} |2 pi i y_1 phi_hat(t) + 1 - e^{2 pi i y_1}|^2 dy dt / t^{n+3};
    beyond T the kernel term is dropped and the remaining integrand
    2 - 2 cos(2 pi y_1) is integrated in closed form.
    """
    kernel = kernel or Kernel("bump")
    S = kernel.support
    T = T or 100.0 / S
    t, wt = _t_nodes(kernel, depth, 1.0, T)
    _, delta, hat0 = profile_transform(kernel, t, n, depth)
    dm = delta / hat0
    J = np.empty_like(t)
    for k, (tk, dk) in enumerate(zip(t, dm)):
        panels = max(4, int(math.ceil(4 * tk)))
        if n == 1:
            y, wy = _gauss_panels(0.0, tk, panels)
            wy = 2.0 * wy
        else:
            th, wth = _gauss_panels(-0.5 * math.pi, 0.5 * math.pi, panels)
            y = tk * np.sin(th)
            wy = wth * 2 * tk ** 2 * np.cos(th) ** 2
        x = 2 * math.pi * y
        g = (2 * np.sin(0.5 * x) ** 2) ** 2 + (x * dk + _x_minus_sin(x)) ** 2
        J[k] = float(np.sum(wy * g))
    I = float(np.sum(wt * J / t ** (n + 3)))
    I += 2.0 / T ** 2 if n == 1 else math.pi / T ** 2
    return I / (4 * math.pi ** 2)


# ---------------------------------------------------------------------------
# physical-space left-hand sides




def _kernel_samples(f: GridFunction, kernel: Kernel, r: float, normalize: bool = False) -> np.ndarray:
    """phi_r(x) = r^-n profile(|x| / r) on the grid centred at the origin."""
    N, h, n = f.N, f.spacing, f.n
    c = (np.arange(N) - N // 2) * h
    rad = np.abs(c) if n == 1 else np.hypot(*np.meshgrid(c, c, indexing="ij"))
    k = kernel.profile(rad / r) / r ** n
    if normalize:
        k = k / (k.sum() * h ** n)
    return k


class _Padded:
    """FFT of f on a doubled grid, reused across radii."""

    def __init__(self, f: GridFunction):
        self.f = f
        self.pad = tuple(2 * s for s in f.values.shape)
        self.F = _rfft(f.values, self.pad)
        self.crop = tuple(slice(0, s) for s in f.values.shape)

    def conv(self, k: np.ndarray, G: np.ndarray | None = None) -> np.ndarray:
        K = _rfft(_centre_kernel(k, self.pad), self.pad)
        src = self.F if G is None else G
        return _irfft(src * K, self.pad)[self.crop] * self.f.spacing ** self.f.n

    def shifted(self, z) -> np.ndarray:
        """f(x + z) for a real vector z by a phase shift on the padded grid."""
        h = self.f.spacing
        freqs = [np.fft.fftfreq(p, h) for p in self.pad[:-1]] + [np.fft.rfftfreq(self.pad[-1], h)]
        z = np.atleast_1d(z)
        phase = np.ones(self.F.shape, dtype=complex)
        for ax, (fr, zz) in enumerate(zip(freqs, z)):
            shape = [1] * len(self.pad)
            shape[ax] = -1
            phase = phase * np.exp(2j * math.pi * fr * zz).reshape(shape)
        return _irfft(self.F * phase, self.pad)[self.crop]


@lru_cache(maxsize=8)
def _tables(kind: str, n: int):
    """Mass c(phi), the radial self-convolution phi * phi and the first moment
    mu(rho) = int_{|u| <= 1} u_1 phi(|rho e_1 - u|) du / c(phi)."""
    kernel = Kernel(kind)
    S = kernel.support
    s, w = _gauss_panels(0.0, S, 256)
    prof = kernel.profile(s)
    c = 2.0 * float(np.sum(w * prof)) if n == 1 else 2 * math.pi * float(np.sum(w * prof * s))
    M = 8192 if n == 1 else 768
    half = 2.2 * S + 0.2
    d = 2 * half / M
    x = (np.arange(M) - M // 2) * d
    rad = np.abs(x) if n == 1 else np.hypot(*np.meshgrid(x, x, indexing="ij"))
    k = kernel.profile(rad)
    auto = _fft_conv(k, k) * d ** n
    line = auto[M // 2:] if n == 1 else auto[M // 2, M // 2:]
    phi2 = CubicSpline(x[M // 2:], line, extrapolate=False)

    rho = np.linspace(0.0, 1.0 + S + 0.05, 601)
    if n == 1:
        u, wu = _gauss_panels(-1.0, 1.0, 256)
        mu = np.array([np.sum(wu * u * kernel.profile(np.abs(p - u))) for p in rho]) / c
    else:
        sr, ws = _gauss_panels(0.0, 1.0, 48)
        th, wt = _gauss_panels(0.0, math.pi, 64)
        u1 = np.outer(sr, np.cos(th))
        u2 = np.outer(sr, np.sin(th))
        wgt = 2.0 * np.outer(ws * sr, wt) * u1
        mu = np.array([np.sum(wgt * kernel.profile(np.hypot(p - u1, u2))) for p in rho]) / c
    mus = CubicSpline(rho, mu, extrapolate=False)
    return c, (lambda t: np.nan_to_num(phi2(t), nan=0.0)), (lambda t: np.nan_to_num(mus(t), nan=0.0))


class _Lags:
    """Auto- and cross-correlations of f and grad f on the lag grid."""

    def __init__(self, f: GridFunction):
        N, n, h = f.N, f.n, f.spacing
        pad = (2 * N,) * n
        F = _rfft(f.values, pad)
        G = [_rfft(g, pad) for g in f.gradient()]
        vol = h ** n
        self.A = _irfft(np.abs(F) ** 2, pad) * vol
        self.B = [_irfft(np.conj(Gi) * F, pad) * vol for Gi in G]
        self.C = [_irfft(np.abs(Gi) ** 2, pad) * vol for Gi in G]
        k = np.arange(2 * N)
        lag = np.where(k < N, k, k - 2 * N) * h
        self.comps = [lag] if n == 1 else np.meshgrid(lag, lag, indexing="ij")
        self.rad = np.sqrt(sum(c * c for c in self.comps))
        self.n, self.h, self.vol = n, h, vol
        self.A0 = float(self.A.flat[0])
        if n == 1:
            ap = self.A[:N]
            self._pos = lag[:N]
            self._cum = np.concatenate([[0.0], np.cumsum(0.5 * (ap[1:] + ap[:-1]))]) * h
        else:
            order = np.argsort(self.rad, axis=None)
            self._pos = self.rad.ravel()[order]
            self._cum = np.cumsum(self.A.ravel()[order]) * vol

    def ball_A(self, r: float) -> float:
        """int_{|z| <= r} A(z) dz."""
        if self.n == 1:
            return 2.0 * float(np.interp(r, self._pos, self._cum))
        return float(self._cum[np.searchsorted(self._pos, r, side="right") - 1])

    def unit(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return [np.where(self.rad > 0, c / self.rad, 0.0) for c in self.comps]


def _plancherel_far(L: _Lags, kernel: Kernel, r: float) -> float:
    c, phi2, _ = _tables(kernel.kind, L.n)
    n = L.n
    cross = float(np.sum(kernel.profile(L.rad / r) * L.A)) * L.vol / r ** n
    auto = float(np.sum(phi2(L.rad / r) * L.A)) * L.vol / r ** n
    return (c * c * L.A0 - 2 * c * cross + auto) / r ** 2


def _second_diff_far(L: _Lags, kernel: Kernel, r: float) -> float:
    c, phi2, mu = _tables(kernel.kind, L.n)
    n = L.n
    vn = 2.0 if n == 1 else math.pi
    p2 = phi2(L.rad / r) / (c * c * r ** n)
    t1 = sum(float(np.sum(p2 * Ci)) for Ci in L.C) * L.vol * vn * r ** (n + 2) / (n + 2)
    t2 = 2.0 * L.A0 * vn * r ** n - 2.0 * L.ball_A(r)
    m = mu(L.rad / r)
    t3 = -2.0 * r * sum(float(np.sum(Bi * m * ui)) for Bi, ui in zip(L.B, L.unit())) * L.vol
    return (t1 + t2 + t3) / r ** (n + 2)


FAR = 64.0


def _r_split(f: GridFunction, factor: float):
    """Near radii [4h, window/8] for the direct route and far radii up to FAR windows."""
    mid = f.window / 8
    return log_grid(4 * f.spacing, mid, factor), log_grid(mid, FAR * f.window, factor)


@dataclass
class SquareFunction:
    """Log-trapezoid value of a per-radius integrand plus both tails.

    ``seam`` is the relative mismatch of the direct and lag routes at the
    radius where they meet.
    """

    value: float
    r: np.ndarray
    per_r: np.ndarray
    tails: tuple = (0.0, 0.0)
    seam: float = 0.0


def _close(r_near, near, r_far, far) -> SquareFunction:
    # integrand ~ r^2 near 0 and ~ r^-2 at infinity: each tail is half the end value
    tails = (0.5 * float(near[0]), 0.5 * float(far[-1]))
    value = log_trapezoid(r_near, near) + log_trapezoid(r_far, far) + sum(tails)
    seam = abs(near[-1] - far[0]) / max(abs(far[0]), 1e-300)
    return SquareFunction(value, np.concatenate([r_near, r_far[1:]]), np.concatenate([near, far[1:]]), tails, seam)


def plancherel_lhs(f: GridFunction, kernel: Kernel | None = None, factor: float = FACTOR) -> SquareFunction:
    """int int |(f * phi_r - c(phi) f)(x) / r|^2 dx dr/r in physical space.

    For r <= window/8 the convolution uses the sampled kernel and c(phi)
    its discrete mass, so the integrand is the quadrature of
    int phi_r(y) (f(x - y) - f(x)) dy.  Larger radii expand the square
    through the autocorrelation of f and the self-convolution of phi.
    """
    kernel = kernel or Kernel("bump")
    r_near, r_far = _r_split(f, factor)
    P = _Padded(f)
    h, n = f.spacing, f.n
    near = []
    for rr in r_near:
        k = _kernel_samples(f, kernel, rr)
        g = P.conv(k) - k.sum() * h ** n * f.values
        near.append(float(np.sum(g * g)) * h ** n / rr ** 2)
    L = _Lags(f)
    far = [_plancherel_far(L, kernel, rr) for rr in r_far]
    return _close(r_near, np.array(near), r_far, np.array(far))


def _z_nodes(n: int, r: float, order: int):
    if n == 1:
        z, w = _gauss_panels(-r, r, order)
        return z[:, None], w
    rho, wr = _gauss_panels(0.0, r, order)
    m = 4 * order
    th = 2 * math.pi * (np.arange(m) + 0.5) / m
    Z = np.stack([np.outer(rho, np.cos(th)).ravel(), np.outer(rho, np.sin(th)).ravel()], axis=1)
    W = np.outer(wr * rho, np.full(m, 2 * math.pi / m)).ravel()
    return Z, W


def second_diff_lhs(f: GridFunction, kernel: Kernel | None = None, factor: float = FACTOR,
                    z_panels: int = 4) -> SquareFunction:
    """int int int_{|z| <= r} |((phi_r * grad f)(x) . z + f(x) - f(x + z)) / r|^2 dz/r^n dx dr/r.

    phi is normalized to unit mass.  Near radii shift f by Fourier phases
    at Gauss nodes in z; far radii use the correlation expansion.
    """
    kernel = kernel or Kernel("bump")
    r_near, r_far = _r_split(f, factor)
    P = _Padded(f)
    Gs = [_rfft(g, P.pad) for g in f.gradient()]
    h, n = f.spacing, f.n
    near = []
    for rr in r_near:
        k = _kernel_samples(f, kernel, rr, normalize=True)
        H = [P.conv(k, G) for G in Gs]
        Z, W = _z_nodes(n, rr, z_panels if n == 1 else max(2, z_panels // 2))
        acc = 0.0
        for z, wz in zip(Z, W):
            e = sum(Hc * zc for Hc, zc in zip(H, z)) + f.values - P.shifted(z)
            acc += wz * float(np.sum(e * e))
        near.append(acc * h ** n / rr ** (n + 2))
    L = _Lags(f)
    far = [_second_diff_far(L, kernel, rr) for rr in r_far]
    return _close(r_near, np.array(near), r_far, np.array(far))


# ---------------------------------------------------------------------------
# lemma checks


def _relative(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return abs(lhs - rhs) / rhs
    return 0.0 if lhs == 0 else math.inf


def verify_fourier_identity(f: GridFunction, kernel: Kernel | None = None, tol: float = 0.02) -> dict:
    """Physical-space LHS against c ||grad f||^2 with c from the profile transform."""
    kernel = kernel or Kernel("bump")
    lhs = plancherel_lhs(f, kernel)
    c = plancherel_constant(kernel, f.n)
    g2 = f.grad_norm2()
    rel = _relative(lhs.value, c * g2)
    gate = plancherel_gate(f)
    return {"identity": "plancherel", "tolerances": {"relative": tol}, "lhs": lhs.value, "c": c,
            "grad_norm2": g2, "rhs": c * g2, "relative_error": rel, "tails": lhs.tails, "seam": lhs.seam,
            "plancherel_gate": gate, "verdict": "PASS" if rel <= tol and gate <= 1e-10 else "FAIL"}


def verify_second_diff(f: GridFunction, kernel: Kernel | None = None, tol: float = 0.03) -> dict:
    kernel = kernel or Kernel("bump")
    lhs = second_diff_lhs(f, kernel)
    c2 = second_diff_constant(kernel, f.n)
    g2 = f.grad_norm2()
    rel = _relative(lhs.value, c2 * g2)
    return {"identity": "second-difference", "tolerances": {"relative": tol}, "lhs": lhs.value, "c_prime": c2,
            "grad_norm2": g2, "rhs": c2 * g2, "relative_error": rel, "tails": lhs.tails, "seam": lhs.seam,
            "verdict": "PASS" if rel <= tol else "FAIL"}


def graph_square_function(f: GridFunction, kernel: Kernel | None = None) -> float:
    """int over x0 of A_rho(x0, f(x0))^2, equal to twice the Plancherel LHS for slopes <= 1/10."""
    return 2.0 * plancherel_lhs(f, kernel).value


# ---------------------------------------------------------------------------
# pointwise coefficients on the graph (n = 1)


def a_rho_formula(f: GridFunction, kernel: Kernel, x0: float, r: float, panels: int = 64) -> float:
    """(phi_r * f(x0) - c(phi) f(x0)) / r by quadrature of the spline of f."""
    sp = f.spline()
    u, w = _gauss_panels(-kernel.support, kernel.support, panels)
    return float(np.sum(w * kernel.profile(np.abs(u)) * (sp(x0 + r * u) - sp(x0)))) / r


def a_rho_montecarlo(f: GridFunction, kernel: Kernel, x0: float, r: float, samples: int = 20000,
                     rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Signed c_rho - r^-2 int_{Omega+} rho((y - x) / r) dy by uniform sampling of the kernel box.

    Returns the estimate and its standard error.
    """
    rng = rng or np.random.default_rng(0)
    sp = f.spline()
    S = kernel.support
    x1 = float(sp(x0))
    u = rng.uniform(-S, S, samples)
    v = rng.uniform(-S, S, samples)
    rho = kernel.profile(np.abs(u)) * kernel.profile(np.abs(v))
    above = (x1 + r * v) > sp(x0 + r * u)
    vals = rho * above * (2 * S) ** 2
    c = _tables(kernel.kind, 1)[0]
    est = 0.5 * c * c - float(vals.mean())
    return est, float(vals.std(ddof=1) / math.sqrt(samples))


def graph_oracle_check(f: GridFunction, kernel: Kernel | None = None, pairs: int = 50, samples: int = 20000,
                       seed: int = 0) -> dict:
    """Compare the reduction formula with a Monte-Carlo volume integral at sampled (x, r)."""
    kernel = kernel or Kernel("bump")
    rng = np.random.default_rng(seed)
    lo, hi = f.axis[0] + 0.1 * f.window, f.axis[-1] - 0.1 * f.window
    rows = []
    for _ in range(pairs):
        x0 = float(rng.uniform(lo, hi))
        r = float(np.exp(rng.uniform(math.log(8 * f.spacing), math.log(f.window / 8))))
        exact = a_rho_formula(f, kernel, x0, r)
        mc, se = a_rho_montecarlo(f, kernel, x0, r, samples, rng)
        rows.append({"x0": x0, "r": r, "formula": exact, "montecarlo": mc, "stderr": se,
                     "z": abs(exact - mc) / se if se > 0 else (0.0 if exact == mc else math.inf)})
    within = sum(row["z"] <= 3.0 for row in rows)
    return {"pairs": pairs, "within_3sigma": within, "rows": rows}


def _band(kernel: Kernel, vmax: float, panels: int):
    S = kernel.support
    u0 = math.sqrt(1.0 - vmax * vmax) if vmax < 1 else 0.0
    u, w = _gauss_panels(u0, S, panels)
    return np.concatenate([-u[::-1], u]), np.concatenate([w[::-1], w])


def _delta_s(sp, kernel: Kernel, x0: np.ndarray, r: float, u, wu, tau, wtau) -> np.ndarray:
    """s_rho - s_psi = int du int_0^{v(u)} [phi(|u|) - phi(sqrt(u^2 + w^2))] dw on the band."""
    v = (sp(x0[:, None] + r * u[None, :]) - sp(x0)[:, None]) / r
    # the integrand is O(v^3); entries below 1e-6 of the largest are dropped
    i, j = np.nonzero(np.abs(v) > 1e-6 * max(float(np.abs(v).max()), 1e-300))
    vv = v[i, j]
    w = vv[:, None] * tau[None, :]
    au = np.abs(u[j])[:, None]
    diff = kernel.profile(au) - kernel.profile(np.sqrt(au * au + w * w))
    return np.bincount(i, weights=(diff @ wtau) * wu[j] * vv, minlength=len(x0))


def rho_psi_gap(f: GridFunction, kernel: Kernel | None = None, stride: int = 16, factor: float = FACTOR,
                band_panels: int = 16, w_nodes: int = 4) -> dict:
    """int_Gamma |A_rho - A_psi|^2 and both square functions for n = 1.

    s_rho(x, r) = (phi_r * f - c f)(x0) / r is exact for slopes <= 1/10;
    s_psi = s_rho - delta_s with delta_s integrated directly over the band
    |u| in [sqrt(1 - v_max^2), 1.1] where rho and psi differ.  Graph points
    are every ``stride``-th sample; far radii use a Toeplitz product on
    that coarse lattice.
    """
    if f.n != 1:
        raise ValueError("the graph comparison is implemented for n = 1")
    kernel = kernel or Kernel("bump")
    slope = f.slope
    if slope > 0.1 + 1e-12:
        raise ValueError("the reduction formula needs slope <= 1/10")
    sp = f.spline()
    r_near, r_far = _r_split(f, factor)
    r = np.concatenate([r_near, r_far[1:]])
    off = stride // 2
    x0 = f.axis[off::stride]
    fc = f.values[off::stride]
    dx = f.spacing * stride
    u, wu = _band(kernel, slope * kernel.support, band_panels)
    tau, wtau = _gauss_panels(0.0, 1.0, 1, order=w_nodes)
    nz = np.flatnonzero(f.values)
    if nz.size == 0:
        return {"gap": 0.0, "slope": 0.0, "grad_norm2": 0.0, "normalized": 0.0, "int_A_rho2": 0.0,
                "int_A_psi2": 0.0}
    lo, hi = f.axis[nz[0]], f.axis[nz[-1]]
    P = _Padded(f)
    h = f.spacing
    c = _tables(kernel.kind, 1)[0]
    lagc = np.abs(x0[:, None] - x0[None, :])
    s_rho = np.empty((len(r), len(x0)))
    ds = np.zeros_like(s_rho)
    for k, rr in enumerate(r):
        if rr <= r_near[-1]:
            ker = _kernel_samples(f, kernel, rr)
            s_rho[k] = ((P.conv(ker) - ker.sum() * h * f.values) / rr)[off::stride]
        else:
            s_rho[k] = (kernel.profile(lagc / rr) @ fc * dx / rr - c * fc) / rr
        near = (x0 + kernel.support * rr > lo) & (x0 - kernel.support * rr < hi)
        ds[k, near] = _delta_s(sp, kernel, x0[near], rr, u, wu, tau, wtau)
    s_psi = s_rho - ds

    def square(s):
        v = s * s
        inner = np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(np.log(r))[:, None], axis=0)
        return 2.0 * (inner + 0.5 * v[0] + 0.5 * v[-1])

    A_rho = np.sqrt(square(s_rho))
    A_psi = np.sqrt(square(s_psi))
    arc = np.sqrt(1.0 + np.gradient(fc, dx) ** 2)
    gap = float(np.sum((A_rho - A_psi) ** 2 * arc) * dx)
    g2 = f.grad_norm2()
    return {"gap": gap, "slope": slope, "grad_norm2": g2,
            "normalized": gap / (slope ** 4 * g2) if g2 > 0 else 0.0,
            "int_A_rho2": float(np.sum(A_rho ** 2 * arc) * dx), "int_A_psi2": float(np.sum(A_psi ** 2 * arc) * dx)}


def verify_lips(base: GridFunction, kernel: Kernel | None = None, slopes=(0.1, 0.05, 0.02), stride: int = 16,
                bracket: tuple = (0.125, 8.0), gap_band: float = 0.5) -> dict:
    """Two-sided comparability of int_Gamma A_psi^2 with ||grad f||^2 over a slope sweep.

    The ratio must stay in ``bracket``, its relative spread from the
    rho-ratio must shrink as the slope decreases, and the gap constant
    fitted at the largest slope must hold within +-gap_band at the others.
    """
    kernel = kernel or Kernel("bump")
    rows = []
    for s in sorted(slopes, reverse=True):
        g = rho_psi_gap(base.with_slope(s), kernel, stride)
        ratio_psi = g["int_A_psi2"] / g["grad_norm2"]
        ratio_rho = g["int_A_rho2"] / g["grad_norm2"]
        rows.append({"slope": s, "ratio_psi": ratio_psi, "ratio_rho": ratio_rho,
                     "spread": abs(ratio_psi / ratio_rho - 1.0), "gap": g["gap"], "gap_constant": g["normalized"]})
    in_bracket = all(bracket[0] <= row["ratio_psi"] <= bracket[1] for row in rows)
    monotone = all(a["spread"] >= b["spread"] for a, b in zip(rows, rows[1:]))
    C = rows[0]["gap_constant"]
    gap_ok = C > 0 and all(abs(row["gap_constant"] / C - 1.0) <= gap_band for row in rows[1:])
    return {"identity": "lipschitz comparability", "tolerances": {"bracket": bracket, "gap_band": gap_band},
            "rows": rows, "expected_ratio": 2 * plancherel_constant(kernel, 1), "gap_constant_fit": C,
            "in_bracket": in_bracket, "spread_monotone": monotone, "gap_ok": bool(gap_ok),
            "verdict": "PASS" if in_bracket and monotone and gap_ok else "FAIL"}
