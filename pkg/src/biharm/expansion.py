"""Nonlinearity, variation-of-parameters kernel, and expansion fitting.

The transformed unknown Y = r^m phi - L obeys a constant-coefficient linear
equation driven by g(Y) = (Y+L)^p - L^p - p L^{p-1} Y.  Its asymptotics as
s = log r -> infinity split into three regimes along the critical ladder:

  (a) p_k < p < p_{k+1}:  W = a0 + sum_j a_j e^{j lam3 s} + b1 e^{lam2 s}
                              + a_{k+1} e^{(k+1) lam3 s} + O(e^{(lam2+lam3) s})
  (b) p = p_k, k >= 2:    the e^{lam2 s} and e^{k lam3 s} terms merge into
                              (b1 s + a_k) e^{k lam3 s}
  (c) p = p_c:            lam2 = lam3 and W = a0 + (b1 s + a1) e^{lam3 s}
                              + b2 s^2 e^{2 lam3 s} + ...

This module fits those bases to shooting output by weighted least squares and
checks the variation-of-parameters representation of Z against the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    IllConditioned,
    InvalidParams,
    SubcriticalInput,
    WindowTooShort,
)
from .ladder import CriticalLadder
from .params import ProblemParams
from .shooting import RadialSolution, exp_kernel_convolve
from .spectrum import Spectrum

COND_LIMIT = 1e12


# --------------------------------------------------------------------------
# nonlinearity and its Taylor coefficients
# --------------------------------------------------------------------------

def taylor_coeffs(p: float, L: float, order: int) -> tuple[float, ...]:
    """Generalized binomial coefficients d_j = C(p, j) L^{p-j} for j = 2..order.

    These are the Taylor coefficients of g about 0; the constant and linear
    terms vanish because the linear part is subtracted from the power.
    """
    if order < 2:
        raise InvalidParams(f"order >= 2 required, got {order}")
    if L <= 0.0:
        raise InvalidParams(f"L > 0 required, got {L}")
    out = []
    binom = p * (p - 1.0) / 2.0  # C(p, 2)
    for j in range(2, order + 1):
        out.append(binom * L ** (p - j))
        binom *= (p - j) / (j + 1.0)
    return tuple(out)


@dataclass(frozen=True)
class Nonlinearity:
    """g(y) = (y+L)^p - L^p - p L^{p-1} y with its order-`order` Taylor data."""

    L: float
    p: float
    order: int = 8

    def __post_init__(self):
        object.__setattr__(self, "taylor", taylor_coeffs(self.p, self.L, self.order))

    taylor: tuple[float, ...] = ()


def g_eval(nl: Nonlinearity, y):
    """Evaluate g; requires y > -L so the power stays on the positive branch."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= -nl.L):
        raise DomainError(f"g undefined at y <= -L = {-nl.L}")
    val = (y + nl.L) ** nl.p - nl.L**nl.p - nl.p * nl.L ** (nl.p - 1.0) * y
    return float(val) if val.ndim == 0 else val


# --------------------------------------------------------------------------
# variation-of-parameters kernel
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VariationKernel:
    """Kernel data for the factored third-order operator on Z.

    Nondegenerate: betas are the partial fractions 1/prod_{j!=i}(lam_i-lam_j)
    over the three negative eigenvalues, paired with plain exponential
    kernels.  Degenerate (lam2 = lam3): two plain kernels at lam1, lam3 and an
    (s - tau)-weighted kernel at lam3.  The homogeneous coefficients alphas
    depend on s0 and are left free for fitting; betas depend only on the
    eigenvalues.
    """

    s0: float
    betas: tuple[float, float, float]
    degenerate: bool
    alphas: tuple[float, float, float] | None = None


def variation_kernel(spec: Spectrum, s0: float) -> VariationKernel:
    lam1, lam2, lam3, _ = spec.lambdas
    if spec.degenerate:
        d = lam1 - lam3
        betas = (1.0 / d**2, -1.0 / d**2, 1.0 / (lam3 - lam1))
    else:
        betas = (
            1.0 / ((lam1 - lam2) * (lam1 - lam3)),
            1.0 / ((lam2 - lam1) * (lam2 - lam3)),
            1.0 / ((lam3 - lam1) * (lam3 - lam2)),
        )
    return VariationKernel(s0=s0, betas=betas, degenerate=spec.degenerate)


def weighted_kernel_convolve(lam: float, s: np.ndarray, g: np.ndarray) -> np.ndarray:
    """J(s) = int_{s_0}^{s} (s - tau) e^{lam (s - tau)} g(tau) dtau.

    Reduced to two plain exponential convolutions: J = s * I[g] - I[tau g].
    """
    return s * exp_kernel_convolve(lam, s, g) - exp_kernel_convolve(lam, s, s * g)


def kernel_convolutions(kern: VariationKernel, spec: Spectrum, s: np.ndarray, g: np.ndarray):
    """The three convolution integrals paired with kern.betas, from s0 = s[0]."""
    lam1, lam2, lam3, _ = spec.lambdas
    if kern.degenerate:
        return (
            exp_kernel_convolve(lam1, s, g),
            exp_kernel_convolve(lam3, s, g),
            weighted_kernel_convolve(lam3, s, g),
        )
    return (
        exp_kernel_convolve(lam1, s, g),
        exp_kernel_convolve(lam2, s, g),
        exp_kernel_convolve(lam3, s, g),
    )


def _homogeneous_columns(kern: VariationKernel, spec: Spectrum, s: np.ndarray):
    lam1, lam2, lam3, _ = spec.lambdas
    sigma = s - kern.s0
    if kern.degenerate:
        return [np.exp(lam1 * sigma), np.exp(lam3 * sigma), sigma * np.exp(lam3 * sigma)]
    return [np.exp(lam1 * sigma), np.exp(lam2 * sigma), np.exp(lam3 * sigma)]


@dataclass(frozen=True)
class RepresentationFit:
    """Fitted homogeneous coefficients and reconstruction of Z."""

    kern: VariationKernel
    alphas: tuple[float, float, float]
    s: np.ndarray
    recon: np.ndarray
    deviation: float


def representation_check(
    sol: RadialSolution,
    spec: Spectrum | None = None,
    kern: VariationKernel | None = None,
    window: tuple[float, float] | None = None,
    return_details: bool = False,
):
    """Deviation of grid Z from its variation-of-parameters representation.

    Builds g(Y) along the grid, forms the convolution part with the kernel
    betas, fits the free homogeneous coefficients by least squares on the
    window, and returns the maximum deviation normalized by max|Z| there.
    """
    if spec is None:
        spec = sol.spectrum
    L = spec.L
    s_all, Y_all, Z_all = sol.s_grid, sol.Y, sol.Z

    if window is None:
        zmax = np.max(np.abs(Z_all))
        solid = np.abs(Z_all) >= 1e-8 * zmax
        idx = np.nonzero(solid)[0]
        window = (float(s_all[idx[0]]), float(s_all[idx[-1]]))
    if kern is None:
        kern = variation_kernel(spec, s0=window[0])
    if kern.s0 > window[0]:
        raise InvalidParams(f"s0 = {kern.s0} must not exceed the window start {window[0]}")

    i0 = int(np.searchsorted(s_all, kern.s0 - 1e-12))
    s = s_all[i0:]
    nl = Nonlinearity(L=L, p=sol.params.p)
    g = g_eval(nl, Y_all[i0:])
    convs = kernel_convolutions(kern, spec, s, g)
    forced = sum(b * I for b, I in zip(kern.betas, convs))

    mask = (s >= window[0]) & (s <= window[1])
    if np.count_nonzero(mask) < 8:
        raise WindowTooShort(f"window {window} holds fewer than 8 nodes")
    cols = _homogeneous_columns(kern, spec, s)
    A = np.stack([c[mask] for c in cols], axis=1)
    scale = np.max(np.abs(A), axis=0)
    A_s = A / scale
    cond = np.linalg.cond(A_s)
    if cond > COND_LIMIT:
        raise IllConditioned(f"homogeneous design matrix condition {cond:.3g}")
    target = sol.Z[i0:][mask] - forced[mask]
    coef_s, *_ = np.linalg.lstsq(A_s, target, rcond=None)
    alphas = tuple(coef_s / scale)

    recon = forced[mask] + A @ np.asarray(alphas)
    z_win = sol.Z[i0:][mask]
    deviation = float(np.max(np.abs(z_win - recon)) / np.max(np.abs(z_win)))
    if return_details:
        return deviation, RepresentationFit(
            kern=kern, alphas=alphas, s=s[mask], recon=recon, deviation=deviation
        )
    return deviation


# --------------------------------------------------------------------------
# regime detection and expansion fitting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Regime:
    """Expansion regime: kind 'a' (open interval p_k < p < p_{k+1}),
    'b' (on a rung p_k, k >= 2), or 'c' (at the critical exponent)."""

    kind: str
    k: int


def detect_regime(
    params: ProblemParams, ladder: CriticalLadder, rung_tol: float = 1e-4
) -> Regime:
    """Locate p relative to the rungs within tolerance band rung_tol.

    Within rung_tol (relative to max(1, p_k)) of a rung the log-corrected
    regime is returned, because the plain exponential basis degenerates there.
    """
    p = params.p
    if params.n != ladder.n:
        raise InvalidParams(f"ladder is for n={ladder.n}, params have n={params.n}")
    if p < ladder.p_c - rung_tol * max(1.0, ladder.p_c):
        raise SubcriticalInput(f"p={p} below p_c={ladder.p_c} for n={ladder.n}")
    for k, p_k in enumerate(ladder.rungs, start=1):
        if abs(p - p_k) < rung_tol * max(1.0, p_k):
            return Regime(kind="c", k=1) if k == 1 else Regime(kind="b", k=k)
    k = 0
    for p_k in ladder.rungs:
        if p > p_k:
            k += 1
    return Regime(kind="a", k=k)


def regime_ordering_ok(spec: Spectrum, regime: Regime) -> bool:
    """Eigenvalue chain required in regime a:
    lam1 < lam2+lam3 < (k+1) lam3 < lam2 < k lam3 < 0."""
    if regime.kind != "a":
        return True
    lam1, lam2, lam3, _ = spec.lambdas
    k = regime.k
    return (
        lam1 < lam2 + lam3 < (k + 1) * lam3 < lam2 < k * lam3 < 0.0
    )


@dataclass(frozen=True)
class CoefficientEstimate:
    value: float
    stderr: float
    resolved: bool  # |value| above its standard error


@dataclass(frozen=True)
class ExpansionFit:
    """Weighted least-squares fit of the regime basis to W = Y + L."""

    regime: Regime
    coefficients: dict[str, CoefficientEstimate]
    residual_slope: float
    theoretical_slope: float
    window: tuple[float, float]
    condition_number: float
    n_points: int


def _regime_columns(regime: Regime, spec: Spectrum, s: np.ndarray):
    """Basis columns evaluated at s, in expansion order, with their names."""
    lam2, lam3 = spec.lambdas[1], spec.lambdas[2]
    k = regime.k
    names = ["a0"]
    cols = [np.ones_like(s)]
    if regime.kind == "a":
        for j in range(1, k + 2):
            names.append(f"a{j}")
            cols.append(np.exp(j * lam3 * s))
        names.append("b1")
        cols.append(np.exp(lam2 * s))
    elif regime.kind == "b":
        if k < 2:
            raise InvalidParams("regime b requires k >= 2")
        for j in range(1, k):
            names.append(f"a{j}")
            cols.append(np.exp(j * lam3 * s))
        names.append("b1")
        cols.append(s * np.exp(k * lam3 * s))
        names.append(f"a{k}")
        cols.append(np.exp(k * lam3 * s))
    elif regime.kind == "c":
        names += ["b1", "a1", "b2"]
        cols += [
            s * np.exp(lam3 * s),
            np.exp(lam3 * s),
            s**2 * np.exp(2.0 * lam3 * s),
        ]
    else:
        raise InvalidParams(f"unknown regime kind {regime.kind!r}")
    return names, cols


def default_fit_window(sol: RadialSolution, spec: Spectrum | None = None):
    """Window where the truncated expansion is both valid and resolved.

    Starts where |Y| has fallen to 1e-4 * L (unmodeled higher-order terms
    below the fit noise, so coefficients come out unbiased) and ends where
    |Y| meets the 1e-9 * L resolution floor.
    """
    if spec is None:
        spec = sol.spectrum
    L = spec.L
    absY = np.abs(sol.Y)
    below = np.nonzero(absY <= 1e-4 * L)[0]
    if below.size == 0:
        raise WindowTooShort("Y never falls to 1e-4 * L; extend r_max")
    i_lo = int(below[0])
    dip = np.nonzero(absY < 1e-9 * L)[0]
    i_hi = int(dip[0]) - 1 if dip.size else absY.size - 1
    if i_hi - i_lo < 32:
        raise WindowTooShort(
            f"only {i_hi - i_lo} nodes between the validity and noise floors"
        )
    return (float(sol.s_grid[i_lo]), float(sol.s_grid[i_hi]))


def _remainder_slope(sol, spec, regime, names, coef, window) -> float:
    """Log-slope of the model defect where the truncated terms dominate.

    The window itself sits where the remainder is below the noise floor (that
    is what makes the coefficients unbiased), so the remainder exponent is
    read off on a segment *below* the window, with a gap that keeps
    coefficient-error backpropagation subdominant.  Falls back to the second
    half of the window when there is no room underneath.
    """
    s_all = sol.s_grid
    lo, hi = window[0] - 1.6, window[0] - 0.9
    mask = (s_all >= lo) & (s_all <= hi)
    if np.count_nonzero(mask) < 12:
        mask = (s_all >= 0.5 * (window[0] + window[1])) & (s_all <= window[1])
    s = s_all[mask]
    _, cols = _regime_columns(regime, spec, s)
    resid = np.abs(sol.W[mask] - np.stack(cols, axis=1) @ coef)
    return float(np.polyfit(s, np.log(resid + 1e-300), 1)[0])


_JACKKNIFE_BLOCKS = 6


def fit_expansion(
    sol: RadialSolution,
    spec: Spectrum | None = None,
    regime: Regime | None = None,
    window: tuple[float, float] | None = None,
) -> ExpansionFit:
    """Fit the regime basis to W on the window by least squares.

    Columns are scaled to unit maximum and solved through an orthogonal
    decomposition.  Weights are uniform: the noise on W is an absolute floor
    set by the integrator, so relative weighting would drown the band where
    the fastest-decaying column is identifiable.  Standard errors come from a
    delete-a-block jackknife, which picks up the correlated (systematic)
    component that an iid estimate misses.  The remainder exponent is
    estimated from the model defect below the window and compared against
    lam2 + lam3.
    """
    if spec is None:
        spec = sol.spectrum
    if regime is None:
        raise InvalidParams("regime descriptor required; call detect_regime")
    if window is None:
        window = default_fit_window(sol, spec)

    s_all = sol.s_grid
    mask = (s_all >= window[0]) & (s_all <= window[1])
    n_pts = int(np.count_nonzero(mask))
    s = s_all[mask]
    W = sol.W[mask]

    names, cols = _regime_columns(regime, spec, s)
    n_par = len(cols)
    if n_pts < n_par + 2 * _JACKKNIFE_BLOCKS:
        raise WindowTooShort(f"{n_pts} nodes cannot support {n_par} coefficients")

    A = np.stack(cols, axis=1)
    scale = np.max(np.abs(A), axis=0)
    A_s = A / scale
    cond = float(np.linalg.cond(A_s))
    if cond > COND_LIMIT:
        raise IllConditioned(
            f"fit design matrix condition {cond:.3g}; near a rung use the "
            "log-corrected basis (regime b/c)"
        )
    coef = np.linalg.lstsq(A_s, W, rcond=None)[0] / scale

    idx = np.arange(n_pts)
    thetas = []
    for block in np.array_split(idx, _JACKKNIFE_BLOCKS):
        keep = np.setdiff1d(idx, block)
        thetas.append(np.linalg.lstsq(A_s[keep], W[keep], rcond=None)[0] / scale)
    thetas = np.array(thetas)
    nb = _JACKKNIFE_BLOCKS
    stderr = np.sqrt((nb - 1) / nb * np.sum((thetas - thetas.mean(axis=0)) ** 2, axis=0))

    coefficients = {
        name: CoefficientEstimate(
            value=float(c), stderr=float(se), resolved=bool(abs(c) > se)
        )
        for name, c, se in zip(names, coef, stderr)
    }

    slope = _remainder_slope(sol, spec, regime, names, coef, window)
    lam2, lam3 = spec.lambdas[1], spec.lambdas[2]
    return ExpansionFit(
        regime=regime,
        coefficients=coefficients,
        residual_slope=slope,
        theoretical_slope=lam2 + lam3,
        window=window,
        condition_number=cond,
        n_points=n_pts,
    )


def window_shift_stability(
    sol: RadialSolution,
    spec: Spectrum | None = None,
    regime: Regime | None = None,
    window: tuple[float, float] | None = None,
    shift: float = 0.1,
) -> dict[str, float]:
    """Coefficient drift, in units of standard error, when the window moves
    right by `shift` of its width."""
    if spec is None:
        spec = sol.spectrum
    if window is None:
        window = default_fit_window(sol, spec)
    base = fit_expansion(sol, spec, regime, window)
    width = window[1] - window[0]
    shifted = (window[0] + shift * width, window[1] + shift * width)
    s_max = float(sol.s_grid[-1])
    if shifted[1] > s_max:
        shifted = (shifted[0] - (shifted[1] - s_max), s_max)
    moved = fit_expansion(sol, spec, regime, shifted)
    out = {}
    for name, est in base.coefficients.items():
        if name not in moved.coefficients:
            continue
        delta = abs(moved.coefficients[name].value - est.value)
        se = max(est.stderr, 1e-300)
        out[name] = delta / se
    return out
