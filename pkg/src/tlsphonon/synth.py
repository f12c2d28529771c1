"""Synthetic Brillouin-gain measurement campaigns.

Replicates the cryogenic measurement protocol: the fiber sits on a large
copper block that warms slowly, the synthesizer sweeps the pump-probe
detuning across the acoustic resonance, and variable attenuators step the
optical powers so the acoustic drive sweeps decades of intensity. The
warm-up is modelled as a deterministic temperature ladder -- one rung per
100 mK, several repeated acquisitions per rung at every power setting --
with i.i.d. Gaussian noise added to the gain samples only (the detuning
axis is synthesizer-set and exact).

At each rung the dissipation rate and the acoustic intensity are mutually
dependent (the drive narrows the line, the narrower line amplifies the
drive), so the pair is solved self-consistently at line center and the
emitted spectrum is the exact Lorentzian for that operating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bloch import RelaxationTimes
from .constants import C_LIGHT, TWO_PI
from .dissipation import (
    LinewidthBreakdown,
    critical_intensity,
    freq_shift_res,
    gamma_rel_closed,
    gamma_res_weak,
)
from .sbs import OpticalDrive, brillouin_frequency, g_b_at_linewidth, stokes_gain
from .tls_core import MaterialParams, PhononMode, TLSEnsemble, _require_positive

RUNG_STEP_K = 0.1          # the acquisition protocol is phrased per 100 mK
DEFAULT_POINTS = 401
DEFAULT_SPAN_FWHM = 10.0   # grid reaches +-10 expected linewidths
FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 200


class ConvergenceError(RuntimeError):
    """Fixed-point iteration for the (Gamma, J) operating point stalled."""


@dataclass(frozen=True)
class ForwardModel:
    """Everything the synthesizer needs to evaluate the physics.

    Exactly one critical-intensity source applies: explicit relaxation
    ``times``, an explicit ``j_c``, or the ensemble's power law (checked in
    that order). ``drift_reference_k`` turns on the resonant frequency drift
    of the line center relative to that temperature.
    """

    material: MaterialParams
    ensemble: TLSEnsemble
    times: Optional[RelaxationTimes] = None
    j_c_explicit: Optional[float] = None
    pump_wavelength: float = 1548.963e-9
    drift_reference_k: Optional[float] = None

    def __post_init__(self):
        _require_positive(pump_wavelength=self.pump_wavelength)
        sources = sum(
            x is not None
            for x in (self.times, self.j_c_explicit, self.ensemble.jc_power_law)
        )
        if sources == 0:
            raise ValueError("no critical-intensity source configured")

    @property
    def pump_omega(self) -> float:
        return TWO_PI * C_LIGHT / self.pump_wavelength

    def j_c(self, temperature: float, polarization: str = "L") -> float:
        if self.times is not None:
            return critical_intensity(self.material, temperature, times=self.times,
                                      ensemble=self.ensemble, polarization=polarization)
        if self.j_c_explicit is not None:
            return self.j_c_explicit
        return self.ensemble.j_c_from_power_law(temperature)

    def line_center(self, temperature: float) -> float:
        """Acoustic resonance frequency at this temperature [rad/s]."""
        omega0 = brillouin_frequency(self.material, self.pump_omega)
        if self.drift_reference_k is None:
            return omega0
        mode = PhononMode.in_material(self.material, omega0, "L")
        return omega0 + freq_shift_res(mode, temperature, self.drift_reference_k,
                                       self.material, self.ensemble)


@dataclass(frozen=True)
class BGSTrace:
    """One recorded Brillouin gain spectrum.

    detuning_grid is strictly increasing [rad/s]; gain holds the Stokes
    power increments [W]. peak_intensity is the self-consistent acoustic
    intensity at line center for this trace's operating point, the quantity
    the saturation analysis uses.
    """

    temperature: float
    detuning_grid: np.ndarray
    gain: np.ndarray
    drive: OpticalDrive
    seed: int
    timestamp_index: int
    setting_index: int = 0
    peak_intensity: float = 0.0

    def __post_init__(self):
        grid = np.asarray(self.detuning_grid, dtype=float)
        gain = np.asarray(self.gain, dtype=float)
        object.__setattr__(self, "detuning_grid", grid)
        object.__setattr__(self, "gain", gain)
        if grid.ndim != 1 or gain.shape != grid.shape:
            raise ValueError("detuning grid and gain must be matching 1-D arrays")
        if len(grid) and not np.all(np.diff(grid) > 0.0):
            raise ValueError("detuning grid must be strictly increasing")
        if not np.all(np.isfinite(gain)):
            raise ValueError("gain samples must be finite")
        _require_positive(temperature=self.temperature)


@dataclass(frozen=True)
class SweepPlan:
    """A warm-up campaign: temperature ladder x power settings x repeats."""

    t_start: float
    t_end: float
    traces_per_100mk: int
    power_settings: Sequence[Tuple[float, float]]
    noise_sigma: float
    model: ForwardModel
    base_seed: int = 0
    detuning_points: int = DEFAULT_POINTS
    detuning_span: float = DEFAULT_SPAN_FWHM

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError("need t_start < t_end")
        _require_positive(t_start=self.t_start)
        if self.traces_per_100mk < 1:
            raise ValueError("traces_per_100mk must be positive")
        if not self.power_settings:
            raise ValueError("at least one power setting required")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if self.detuning_points < 7:
            raise ValueError("detuning grid too coarse to resolve a line")

    def rung_temperatures(self) -> List[float]:
        """Ladder rungs, one per 100 mK bin, sitting at the bin centers."""
        rungs = []
        k = 0
        while True:
            t = self.t_start + (k + 0.5) * RUNG_STEP_K
            if t >= self.t_end:
                break
            rungs.append(t)
            k += 1
        if not rungs:
            raise ValueError("temperature range shorter than one 100 mK step")
        return rungs


@dataclass(frozen=True)
class OperatingPoint:
    """Converged self-consistent line-center state of one acquisition."""

    gamma_total: float
    peak_intensity: float
    breakdown: LinewidthBreakdown
    iterations: int
    residual: float


def solve_self_consistent(
    temperature: float,
    drive: OpticalDrive,
    model: ForwardModel,
    *,
    center: Optional[float] = None,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> OperatingPoint:
    """Solve the coupled (linewidth, intensity) fixed point at line center.

    The peak intensity scales as 1/Gamma^2 (one 1/Gamma from the steady
    state, one from the gain-linewidth product), while the resonant loss
    shrinks as the intensity saturates it. The map Gamma -> Gamma(J(Gamma))
    is monotone, so plain iteration converges for physical parameters;
    failure to do so within ``max_iter`` raises :class:`ConvergenceError`.
    """
    material, ensemble = model.material, model.ensemble
    if center is None:
        center = model.line_center(temperature)
    mode = PhononMode.in_material(material, center, "L")
    gamma_weak = gamma_res_weak(mode, temperature, material, ensemble)
    floor = gamma_rel_closed(temperature, "L", material, ensemble) + ensemble.gamma_bg
    j_c = model.j_c(temperature, "L")

    # J_peak(Gamma) = coupling / Gamma^2 at omega_IM = center
    omega_s = drive.pump_omega - center
    coupling = (material.sound_speed("L") * material.g_b_ref * material.gamma_ref
                * drive.pump_power * drive.stokes_power
                * (center / omega_s) / material.a_eff)

    gamma = gamma_weak + floor
    for iteration in range(1, max_iter + 1):
        j_peak = coupling / gamma ** 2
        new_gamma = gamma_weak / math.sqrt(1.0 + j_peak / j_c) + floor
        residual = abs(new_gamma - gamma) / new_gamma
        gamma = new_gamma
        if residual < tol:
            break
    else:
        raise ConvergenceError(
            f"(Gamma, J) fixed point not converged after {max_iter} iterations "
            f"(last relative step {residual:.3e}); parameters are likely unphysical"
        )
    j_peak = coupling / gamma ** 2
    res = gamma - floor
    breakdown = LinewidthBreakdown(
        gamma_res=res,
        gamma_rel=floor - ensemble.gamma_bg,
        gamma_bg=ensemble.gamma_bg,
        total=gamma,
    )
    return OperatingPoint(
        gamma_total=gamma,
        peak_intensity=j_peak,
        breakdown=breakdown,
        iterations=iteration,
        residual=residual,
    )


def _trace_seed(base_seed: int, timestamp_index: int) -> int:
    """Stable per-trace seed mixing; identical on every platform."""
    ss = np.random.SeedSequence([int(base_seed), int(timestamp_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def default_detuning_grid(
    temperature: float,
    model: ForwardModel,
    points: int = DEFAULT_POINTS,
    span: float = DEFAULT_SPAN_FWHM,
) -> np.ndarray:
    """Grid centered on the resonance, spanning +-span expected linewidths."""
    center = model.line_center(temperature)
    mode = PhononMode.in_material(model.material, center, "L")
    expected = (gamma_res_weak(mode, temperature, model.material, model.ensemble)
                + gamma_rel_closed(temperature, "L", model.material, model.ensemble)
                + model.ensemble.gamma_bg)
    return np.linspace(center - span * expected, center + span * expected, points)


def synth_trace(
    temperature: float,
    drive: OpticalDrive,
    model: ForwardModel,
    noise_sigma: float,
    seed: int,
    *,
    detuning_grid: Optional[np.ndarray] = None,
    timestamp_index: int = 0,
    setting_index: int = 0,
) -> BGSTrace:
    """Generate one gain spectrum at the given operating point.

    The (Gamma, J) pair is solved self-consistently at line center; the
    spectrum is the corresponding Lorentzian with the gain coefficient
    rescaled to the converged linewidth. Additive Gaussian noise of standard
    deviation ``noise_sigma`` [W] lands on the gain only. Bit-identical for
    identical arguments.
    """
    if detuning_grid is None:
        detuning_grid = default_detuning_grid(temperature, model)
    center = model.line_center(temperature)
    point = solve_self_consistent(temperature, drive, model, center=center)
    g_b = g_b_at_linewidth(model.material, point.gamma_total)
    gain = stokes_gain(drive, center, point.gamma_total, g_b, omega_im=detuning_grid)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        gain = gain + rng.normal(0.0, noise_sigma, size=gain.shape)
    return BGSTrace(
        temperature=temperature,
        detuning_grid=np.asarray(detuning_grid, dtype=float),
        gain=np.asarray(gain, dtype=float),
        drive=drive,
        seed=int(seed),
        timestamp_index=timestamp_index,
        setting_index=setting_index,
        peak_intensity=point.peak_intensity,
    )


@dataclass(frozen=True)
class Acquisition:
    """One planned trace: everything synth_trace needs, picklable."""

    temperature: float
    drive: OpticalDrive
    seed: int
    timestamp_index: int
    setting_index: int


def plan_acquisitions(plan: SweepPlan) -> Tuple[np.ndarray, List[Acquisition]]:
    """Expand a sweep plan into its shared detuning grid and acquisition list.

    Every power setting is visited at every ladder rung, ``traces_per_100mk``
    times, rung-major, setting-minor, repeats innermost. The grid is set
    once for the whole campaign (as a synthesizer span would be), wide
    enough to cover the line at every rung including its thermal drift.
    ``timestamp_index`` is the global ordinal and seeds each trace, so a
    parallel evaluation agrees with the serial one bit for bit.
    """
    model = plan.model
    rungs = plan.rung_temperatures()

    lo = math.inf
    hi = -math.inf
    for t in rungs:
        edges = default_detuning_grid(t, model, points=2, span=plan.detuning_span)
        lo = min(lo, edges[0])
        hi = max(hi, edges[-1])
    grid = np.linspace(lo, hi, plan.detuning_points)

    acquisitions = []
    ordinal = 0
    for temperature in rungs:
        for setting_index, (pump, stokes) in enumerate(plan.power_settings):
            drive = OpticalDrive(
                pump_power=pump,
                stokes_power=stokes,
                pump_omega=model.pump_omega,
                detuning=model.line_center(temperature),
                fiber_length=model.material.l_fut,
            )
            for _ in range(plan.traces_per_100mk):
                acquisitions.append(Acquisition(
                    temperature=temperature,
                    drive=drive,
                    seed=_trace_seed(plan.base_seed, ordinal),
                    timestamp_index=ordinal,
                    setting_index=setting_index,
                ))
                ordinal += 1
    return grid, acquisitions


def run_acquisition(acq: Acquisition, plan: SweepPlan, grid: np.ndarray) -> BGSTrace:
    return synth_trace(
        acq.temperature, acq.drive, plan.model, plan.noise_sigma, acq.seed,
        detuning_grid=grid,
        timestamp_index=acq.timestamp_index,
        setting_index=acq.setting_index,
    )


def synth_sweep(plan: SweepPlan) -> List[BGSTrace]:
    """Run the full warm-up campaign described by ``plan``."""
    grid, acquisitions = plan_acquisitions(plan)
    return [run_acquisition(acq, plan, grid) for acq in acquisitions]


def bin_traces(
    traces: Sequence[BGSTrace], bin_width: float
) -> List[Tuple[float, BGSTrace]]:
    """Average traces in temperature bins of the given width.

    All traces must share one detuning grid; resampling is out of scope and
    mismatched grids are rejected. Returns (bin center, averaged trace)
    pairs sorted by bin center, empty bins omitted. The averaged trace
    carries the mean member temperature and mean peak intensity; drive and
    indices come from the first member.
    """
    _require_positive(bin_width=bin_width)
    if not traces:
        return []
    grid = traces[0].detuning_grid
    for tr in traces[1:]:
        if not np.array_equal(tr.detuning_grid, grid):
            raise ValueError("traces do not share a common detuning grid")

    bins = {}
    for tr in traces:
        # rungs sit at bin centers; the epsilon guards exact-boundary floats
        idx = math.floor(tr.temperature / bin_width + 1e-9)
        bins.setdefault(idx, []).append(tr)

    out = []
    for idx in sorted(bins):
        members = bins[idx]
        gain = np.mean([m.gain for m in members], axis=0)
        first = members[0]
        averaged = BGSTrace(
            temperature=float(np.mean([m.temperature for m in members])),
            detuning_grid=grid,
            gain=gain,
            drive=first.drive,
            seed=first.seed,
            timestamp_index=first.timestamp_index,
            setting_index=first.setting_index,
            peak_intensity=float(np.mean([m.peak_intensity for m in members])),
        )
        out.append(((idx + 0.5) * bin_width, averaged))
    return out
