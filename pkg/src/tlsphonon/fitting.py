"""Inverse problem: from gain spectra back to tunneling-state parameters.

Stages mirror the measurement analysis: Lorentzian fits per averaged
spectrum give (center, linewidth); linewidth-vs-intensity fits per
temperature give the strength of the saturable absorption, the critical
intensity, and the non-saturable offset; a power law summarizes the
critical intensity across temperature; the offset's cubic temperature term
decomposes into relaxation absorption plus a constant floor; and the fitted
coupling predicts the frequency drift for comparison against the measured
line centers.

All fitters are deterministic: fixed initialization rules, fixed iteration
schedule, no randomized restarts. Covariances come from the Jacobian at the
optimum scaled by the residual variance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .constants import HBAR, KB
from .numerics import digamma_half_plus_imag
from .synth import BGSTrace
from .tls_core import MaterialParams, PhononMode, TLSEnsemble, min_lifetime

MAX_FIT_EVALS = 500


class FitError(RuntimeError):
    """A fit could not be run or did not converge."""


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LorentzianFit:
    """Per-spectrum fit: center, FWHM, peak gain, with 3x3 covariance
    ordered (omega_hat, gamma_hat, peak_hat)."""

    omega_hat: float
    gamma_hat: float
    peak_hat: float
    covariance: np.ndarray
    residual_norm: float

    def __post_init__(self):
        if not self.gamma_hat > 0.0:
            raise ValueError("fitted linewidth must be positive")

    @property
    def omega_sigma(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def gamma_sigma(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))


@dataclass(frozen=True)
class SaturationFit:
    """Per-temperature saturation fit, covariance ordered
    (p_gamma2, j_c, gamma0)."""

    p_gamma2: float
    j_c: float
    gamma0: float
    covariance: np.ndarray
    temperature: float

    @property
    def p_gamma2_sigma(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def j_c_sigma(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))

    @property
    def gamma0_sigma(self) -> float:
        return math.sqrt(max(self.covariance[2, 2], 0.0))


@dataclass(frozen=True)
class PowerLawFit:
    """J_c = a T^b across temperatures; covariance ordered (a, b)."""

    a: float
    b: float
    covariance: np.ndarray


@dataclass(frozen=True)
class Gamma0Decomposition:
    """Split of the non-saturable offset into a cubic term plus a floor.

    gamma0(T) = coeff_t3 * T^3 + gamma_bg. With the saturation-stage
    coupling product held fixed, coeff_t3 yields the longitudinal
    deformation potential and hence the bare spectral density.
    """

    coeff_t3: float
    gamma_bg: float
    gamma_l: float
    p: float
    covariance: np.ndarray  # (coeff_t3, gamma_bg)

    @property
    def gamma_bg_sigma(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))


@dataclass(frozen=True)
class FreqShiftRow:
    """One line of the measured-vs-predicted frequency drift table [rad/s]."""

    temperature: float
    measured: float
    predicted: float
    discrepancy: float
    uncertainty: float


@dataclass(frozen=True)
class TimesExtraction:
    """Relaxation times implied by a fitted critical intensity."""

    t1_t2: float  # product [s^2]
    t1: float     # minimum-lifetime estimate [s]
    t2: float     # t1_t2 / t1 [s]


# ---------------------------------------------------------------------------
# Lorentzian stage
# ---------------------------------------------------------------------------

def _lorentzian(omega, center, gamma, peak):
    half = gamma / 2.0
    return peak * half ** 2 / ((omega - center) ** 2 + half ** 2)


def _half_max_width(x, y, i_peak):
    """Distance between the half-maximum crossings around the peak sample."""
    half = y[i_peak] / 2.0
    left = x[0]
    for i in range(i_peak, -1, -1):
        if y[i] <= half:
            left = x[i]
            break
    right = x[-1]
    for i in range(i_peak, len(y)):
        if y[i] <= half:
            right = x[i]
            break
    width = right - left
    if width <= 0.0:
        width = (x[-1] - x[0]) / 4.0  # window too narrow to show crossings
    return width


def fit_lorentzian(trace: BGSTrace, sigma: Optional[float] = None) -> LorentzianFit:
    """Least-squares Lorentzian fit of one (averaged) gain spectrum.

    Initialization: center at the maximum sample, peak at its value, width
    from the half-maximum crossings. Converges when the relative step norm
    drops below 1e-10; more than 500 model evaluations raises
    :class:`FitError`, as does data with no discernible peak (maximum less
    than 3 median absolute deviations above the window baseline).

    ``sigma`` (scalar or per-point) enables inverse-variance weighting.
    """
    x = np.asarray(trace.detuning_grid, dtype=float)
    y = np.asarray(trace.gain, dtype=float)
    if len(x) < 7:
        raise FitError(f"need at least 7 samples, got {len(x)}")
    # baseline = window minimum: a heavily truncated window has no flat
    # wings, so the median would sit halfway up the line itself
    baseline = float(np.min(y))
    mad = float(np.median(np.abs(y - np.median(y))))
    i_peak = int(np.argmax(y))
    if not (y[i_peak] - baseline > 3.0 * mad):
        raise FitError(
            "no discernible peak: max is within 3 median absolute deviations "
            "of the baseline (flat trace)"
        )

    center0 = x[i_peak]
    peak0 = y[i_peak]
    gamma0 = _half_max_width(x, y, i_peak)
    weights = None
    if sigma is not None:
        weights = 1.0 / np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)

    # normalized parameters keep the step-norm stopping rule meaningful
    # across the wildly different scales of center, width, and peak
    scale = np.array([gamma0, gamma0, peak0])

    def residuals(p):
        center = center0 + p[0] * scale[0]
        gamma = p[1] * scale[1]
        peak = p[2] * scale[2]
        r = _lorentzian(x, center, gamma, peak) - y
        return r * weights if weights is not None else r

    def jacobian(p):
        center = center0 + p[0] * scale[0]
        gamma = p[1] * scale[1]
        peak = p[2] * scale[2]
        half = gamma / 2.0
        d = (x - center) ** 2 + half ** 2
        j = np.empty((len(x), 3))
        j[:, 0] = peak * half ** 2 * 2.0 * (x - center) / d ** 2 * scale[0]
        j[:, 1] = peak * half * (x - center) ** 2 / d ** 2 * scale[1]
        j[:, 2] = half ** 2 / d * scale[2]
        if weights is not None:
            j *= weights[:, None]
        return j

    sol = least_squares(
        residuals, np.array([0.0, 1.0, 1.0]), jac=jacobian,
        bounds=([-np.inf, 1e-12, 1e-12], [np.inf, np.inf, np.inf]),
        xtol=1e-10, ftol=None, gtol=None, max_nfev=MAX_FIT_EVALS,
    )
    if sol.status == 0:
        raise FitError(f"Lorentzian fit did not converge within {MAX_FIT_EVALS} evaluations")

    params = np.array([center0 + sol.x[0] * scale[0], sol.x[1] * scale[1], sol.x[2] * scale[2]])
    cov_norm = _covariance_from_jacobian(sol.jac, sol.fun)
    s = np.diag(scale)
    cov = s @ cov_norm @ s
    return LorentzianFit(
        omega_hat=float(params[0]),
        gamma_hat=float(params[1]),
        peak_hat=float(params[2]),
        covariance=cov,
        residual_norm=float(np.linalg.norm(sol.fun)),
    )


def _covariance_from_jacobian(jac: np.ndarray, residuals: np.ndarray) -> np.ndarray:
    """sigma_hat^2 (J^T J)^-1 with sigma_hat^2 the residual variance."""
    n, p = jac.shape
    dof = max(n - p, 1)
    sigma2 = float(residuals @ residuals) / dof
    jtj = jac.T @ jac
    try:
        inv = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        inv = np.linalg.pinv(jtj)
    cov = sigma2 * inv
    return 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# saturation stage
# ---------------------------------------------------------------------------

def saturation_rate(j, p_gamma2, j_c, gamma0, mode: PhononMode,
                    material: MaterialParams, temperature: float):
    """Gamma(J) = pi (P gamma^2) Omega tanh(hbar Omega/2kT) / (rho v^2 sqrt(1+J/J_c)) + Gamma0."""
    v = material.sound_speed(mode.polarization)
    amp = (math.pi * p_gamma2 * mode.omega / (material.rho * v ** 2)
           * math.tanh(HBAR * mode.omega / (2.0 * KB * temperature)))
    return amp / np.sqrt(1.0 + np.asarray(j, dtype=float) / j_c) + gamma0


def _check_saturation_points(j):
    j = np.asarray(j, dtype=float)
    if len(j) < 5:
        raise FitError(f"saturation fit needs >= 5 intensity points, got {len(j)}")
    if np.any(j <= 0.0):
        raise FitError("saturation fit needs strictly positive intensities")
    if j.max() / j.min() < 10.0:
        raise FitError("saturation fit needs intensities spanning at least one decade")
    return j


def _warn_if_flat(j, j_c_hat, temperature):
    if j.max() < 0.1 * j_c_hat or j.min() > 10.0 * j_c_hat:
        warnings.warn(
            f"saturation fit at T={temperature} K is in a flat direction "
            f"(J/J_c all {'<< 1' if j.max() < 0.1 * j_c_hat else '>> 1'}); "
            "J_c is weakly identified and its covariance is inflated",
            stacklevel=3,
        )


def fit_saturation(
    points: Sequence[Tuple[float, float]],
    mode: PhononMode,
    material: MaterialParams,
    temperature: float,
    sigmas: Optional[Sequence[float]] = None,
) -> SaturationFit:
    """Three-parameter saturation fit of (intensity, linewidth) pairs at one T.

    Initialization: gamma0 from the smallest linewidth, the saturable
    amplitude from the linewidth range, J_c from the median intensity. Data
    entirely in the unsaturated (or fully saturated) regime cannot pin J_c;
    that case completes but emits a flat-direction warning.
    """
    pts = np.asarray(points, dtype=float)
    j = _check_saturation_points(pts[:, 0])
    g = pts[:, 1]
    weights = None
    if sigmas is not None:
        weights = 1.0 / np.asarray(sigmas, dtype=float)

    v = material.sound_speed(mode.polarization)
    tanh_fac = math.tanh(HBAR * mode.omega / (2.0 * KB * temperature))
    amp_to_pg2 = material.rho * v ** 2 / (math.pi * mode.omega * tanh_fac)

    gamma0_init = float(g.min())
    amp_init = max(float(g.max() - g.min()), 1e-3 * gamma0_init)
    pg2_init = amp_init * amp_to_pg2
    jc_init = float(np.median(j))
    scale = np.array([pg2_init, jc_init, max(gamma0_init, 1e-3 * amp_init)])

    def residuals(p):
        r = saturation_rate(j, p[0] * scale[0], p[1] * scale[1], p[2] * scale[2],
                            mode, material, temperature) - g
        return r * weights if weights is not None else r

    sol = least_squares(
        residuals, np.array([1.0, 1.0, 1.0]),
        bounds=(np.full(3, 1e-12), np.full(3, np.inf)),
        xtol=1e-10, ftol=None, gtol=None, max_nfev=MAX_FIT_EVALS,
    )
    if sol.status == 0:
        raise FitError(f"saturation fit did not converge within {MAX_FIT_EVALS} evaluations")

    s = np.diag(scale)
    cov = s @ _covariance_from_jacobian(sol.jac, sol.fun) @ s
    fit = SaturationFit(
        p_gamma2=float(sol.x[0] * scale[0]),
        j_c=float(sol.x[1] * scale[1]),
        gamma0=float(sol.x[2] * scale[2]),
        covariance=cov,
        temperature=temperature,
    )
    _warn_if_flat(j, fit.j_c, temperature)
    return fit


@dataclass(frozen=True)
class SharedSaturationResult:
    """Joint saturation fit with one coupling product across all bins."""

    p_gamma2: float
    p_gamma2_sigma: float
    per_bin: List[SaturationFit]


def fit_saturation_shared(
    bins: Sequence[Tuple[float, PhononMode, Sequence[Tuple[float, float]]]],
    material: MaterialParams,
    sigmas: Optional[Sequence[Sequence[float]]] = None,
) -> SharedSaturationResult:
    """Saturation fits for every temperature bin with a shared P gamma^2.

    The coupling product is a material constant, so by default it is fit
    globally: parameters are (p_gamma2, {j_c_i}, {gamma0_i}). Per-bin fits
    seed the initialization; bins whose individual fit fails fall back to
    heuristic starting values rather than aborting the stage.
    """
    if not bins:
        raise FitError("no bins to fit")
    n = len(bins)
    inits = []
    for idx, (temperature, mode, points) in enumerate(bins):
        s = sigmas[idx] if sigmas is not None else None
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                f = fit_saturation(points, mode, material, temperature, sigmas=s)
            inits.append((f.p_gamma2, f.j_c, f.gamma0))
        except FitError:
            pts = np.asarray(points, dtype=float)
            v = material.sound_speed(mode.polarization)
            tanh_fac = math.tanh(HBAR * mode.omega / (2.0 * KB * temperature))
            amp = max(float(pts[:, 1].max() - pts[:, 1].min()), 1e-6 * pts[:, 1].min())
            inits.append((
                amp * material.rho * v ** 2 / (math.pi * mode.omega * tanh_fac),
                float(np.median(pts[:, 0])),
                float(pts[:, 1].min()),
            ))

    pg2_0 = float(np.median([i[0] for i in inits]))
    scale = np.concatenate([[pg2_0], [i[1] for i in inits], [i[2] for i in inits]])

    def unpack(p):
        pg2 = p[0] * scale[0]
        jcs = p[1:1 + n] * scale[1:1 + n]
        g0s = p[1 + n:] * scale[1 + n:]
        return pg2, jcs, g0s

    def residuals(p):
        pg2, jcs, g0s = unpack(p)
        out = []
        for idx, (temperature, mode, points) in enumerate(bins):
            pts = np.asarray(points, dtype=float)
            r = saturation_rate(pts[:, 0], pg2, jcs[idx], g0s[idx],
                                mode, material, temperature) - pts[:, 1]
            if sigmas is not None:
                r = r / np.asarray(sigmas[idx], dtype=float)
            out.append(r)
        return np.concatenate(out)

    x0 = np.ones(1 + 2 * n)
    x0[1:1 + n] = [i[1] / s for i, s in zip(inits, scale[1:1 + n])]
    x0[1 + n:] = [i[2] / s for i, s in zip(inits, scale[1 + n:])]
    sol = least_squares(
        residuals, x0,
        bounds=(np.full(1 + 2 * n, 1e-12), np.full(1 + 2 * n, np.inf)),
        xtol=1e-10, ftol=None, gtol=None, max_nfev=200 * (1 + 2 * n),
    )
    if sol.status == 0:
        raise FitError("shared saturation fit did not converge")

    s_mat = np.diag(scale)
    cov = s_mat @ _covariance_from_jacobian(sol.jac, sol.fun) @ s_mat
    pg2, jcs, g0s = unpack(sol.x)

    per_bin = []
    for idx, (temperature, mode, points) in enumerate(bins):
        sel = np.array([0, 1 + idx, 1 + n + idx])
        sub = cov[np.ix_(sel, sel)]
        fit = SaturationFit(
            p_gamma2=float(pg2),
            j_c=float(jcs[idx]),
            gamma0=float(g0s[idx]),
            covariance=sub,
            temperature=temperature,
        )
        pts = np.asarray(points, dtype=float)
        _warn_if_flat(pts[:, 0], fit.j_c, temperature)
        per_bin.append(fit)
    return SharedSaturationResult(
        p_gamma2=float(pg2),
        p_gamma2_sigma=float(math.sqrt(max(cov[0, 0], 0.0))),
        per_bin=per_bin,
    )


# ---------------------------------------------------------------------------
# power law, offset decomposition, times
# ---------------------------------------------------------------------------

def fit_powerlaw(points: Sequence[Tuple[float, float]]) -> PowerLawFit:
    """Fit J_c = a T^b by linear least squares in (ln T, ln J_c).

    Needs at least three points (two would leave the covariance undefined);
    invariant under reordering of the points.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        raise FitError(f"power-law fit needs >= 3 points, got {len(pts)}")
    if np.any(pts <= 0.0):
        raise FitError("power-law fit needs positive temperatures and intensities")
    lt = np.log(pts[:, 0])
    lj = np.log(pts[:, 1])
    design = np.column_stack([np.ones_like(lt), lt])
    coef, *_ = np.linalg.lstsq(design, lj, rcond=None)
    resid = lj - design @ coef
    dof = max(len(pts) - 2, 1)
    cov_log = float(resid @ resid) / dof * np.linalg.inv(design.T @ design)
    a = math.exp(coef[0])
    jac = np.diag([a, 1.0])  # (ln a, b) -> (a, b)
    return PowerLawFit(a=a, b=float(coef[1]), covariance=jac @ cov_log @ jac.T)


def fit_gamma0_decomposition(
    points: Sequence[Tuple[float, float]],
    material: MaterialParams,
    p_gamma2: float,
    *,
    polarization: str = "L",
    gamma_t_ratio_sq: float = 0.5,
    sigmas: Optional[Sequence[float]] = None,
) -> Gamma0Decomposition:
    """Split the fitted offsets Gamma0(T) into c T^3 + Gamma_bg.

    Linear least squares in (T^3, 1). With the coupling product from the
    saturation stage held fixed and gamma_t^2 = gamma_t_ratio_sq * gamma_l^2,
    the cubic coefficient determines the deformation potential and the bare
    spectral density.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        raise FitError(f"offset decomposition needs >= 3 points, got {len(pts)}")
    t3 = pts[:, 0] ** 3
    g0 = pts[:, 1]
    design = np.column_stack([t3, np.ones_like(t3)])
    if sigmas is not None:
        w = 1.0 / np.asarray(sigmas, dtype=float)
        coef, *_ = np.linalg.lstsq(design * w[:, None], g0 * w, rcond=None)
        resid = (g0 - design @ coef) * w
        jtj = (design * w[:, None]).T @ (design * w[:, None])
    else:
        coef, *_ = np.linalg.lstsq(design, g0, rcond=None)
        resid = g0 - design @ coef
        jtj = design.T @ design
    dof = max(len(pts) - 2, 1)
    cov = float(resid @ resid) / dof * np.linalg.inv(jtj)
    coeff_t3, gamma_bg = float(coef[0]), float(coef[1])
    if coeff_t3 <= 0.0:
        raise FitError("offset decomposition found a nonpositive cubic term; "
                       "relaxation absorption is not identifiable in this data")

    v = material.sound_speed(polarization)
    channel = 1.0 / material.v_l ** 5 + gamma_t_ratio_sq / material.v_t ** 5
    k = (math.pi ** 3 / 24.0 * KB ** 3 * channel
         / (material.rho ** 2 * v ** 2 * HBAR ** 4))
    gamma_l_sq = coeff_t3 / (k * p_gamma2)
    gamma_l = math.sqrt(gamma_l_sq)
    return Gamma0Decomposition(
        coeff_t3=coeff_t3,
        gamma_bg=gamma_bg,
        gamma_l=gamma_l,
        p=p_gamma2 / gamma_l_sq,
        covariance=cov,
    )


def extract_times(
    sat: SaturationFit,
    material: MaterialParams,
    ensemble: TLSEnsemble,
    mode: PhononMode,
    temperature: float,
) -> TimesExtraction:
    """Relaxation times from a fitted critical intensity.

    T1 T2 = hbar^2 rho v^3 / (2 gamma^2 J_c); T1 is estimated as the minimum
    TLS lifetime at the probed splitting, and T2 follows from the product.
    """
    gamma = ensemble.deformation_potential(mode.polarization)
    v = material.sound_speed(mode.polarization)
    t1_t2 = HBAR ** 2 * material.rho * v ** 3 / (2.0 * gamma ** 2 * sat.j_c)
    t1 = min_lifetime(HBAR * mode.omega, material, ensemble, temperature)
    return TimesExtraction(t1_t2=t1_t2, t1=t1, t2=t1_t2 / t1)


# ---------------------------------------------------------------------------
# frequency drift comparison
# ---------------------------------------------------------------------------

def compare_freq_shift(
    fits: Sequence[Tuple[float, LorentzianFit]],
    t0: float,
    material: MaterialParams,
    ensemble: TLSEnsemble,
    *,
    p_gamma2: Optional[float] = None,
    p_gamma2_sigma: float = 0.0,
    polarization: str = "L",
) -> List[FreqShiftRow]:
    """Measured center drift vs the resonant-absorption prediction.

    The fit whose temperature is closest to ``t0`` anchors both columns, so
    the reference row reads (0, 0) exactly. The prediction uses the supplied
    coupling product (typically the saturation-stage fit; falls back to the
    ensemble's); its covariance propagates into the per-row uncertainty
    together with the measured center uncertainties.
    """
    if not fits:
        raise FitError("no fits to compare")
    temps = np.array([t for t, _ in fits])
    if not (temps.min() <= t0 <= temps.max()):
        raise FitError(f"fits do not span the reference temperature {t0} K")
    ref_idx = int(np.argmin(np.abs(temps - t0)))
    t_ref, ref = fits[ref_idx]
    if p_gamma2 is None:
        p_gamma2 = ensemble.p * ensemble.deformation_potential(polarization) ** 2

    v = material.sound_speed(polarization)
    omega0 = ref.omega_hat
    scale = p_gamma2 * omega0 / (material.rho * v ** 2)

    def bracket(t):
        x = HBAR * omega0 / (KB * t)
        return math.log(x) - digamma_half_plus_imag(x / (2.0 * math.pi))

    bracket_ref = bracket(t_ref)
    rows = []
    for temperature, fit in fits:
        if fit is ref:
            measured = 0.0
            predicted = 0.0
            sigma_meas = 0.0
        else:
            measured = fit.omega_hat - ref.omega_hat
            predicted = -scale * (bracket(temperature) - bracket_ref)
            sigma_meas = math.hypot(fit.omega_sigma, ref.omega_sigma)
        sigma_pred = abs(predicted) * (p_gamma2_sigma / p_gamma2) if p_gamma2 > 0 else 0.0
        rows.append(FreqShiftRow(
            temperature=temperature,
            measured=measured,
            predicted=predicted,
            discrepancy=measured - predicted,
            uncertainty=math.hypot(sigma_meas, sigma_pred),
        ))
    return rows
