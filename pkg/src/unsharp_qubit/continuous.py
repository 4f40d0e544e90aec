"""Time-continuous limit: conditional master equation and closed forms.

Counting the measurements as if they happened at the constant rate
12/precision^2 maps step n onto the continuous time t = 12 n / precision^2.
In that limit the conditional state obeys the Ito equation

    d rho = -1/2 sum_k [sigma_k, [sigma_k, rho]] dt
            + sum_k {sigma_k - <sigma_k>, rho} dW_k,

with isotropic unit-intensity white noise, alongside the record process
dy = <sigma> dt + dW / 2.  In Bloch coordinates the same equation reads

    dr = -4 r dt + 2 (dW - r (r.dW)),

which keeps the unit sphere invariant and drives the purity
u = |r|^2 by du = 4(1-u)(3-u) dt + 4(1-u) r.dW.  Dropping the diffusion
term gives the closed-form purity and mean-fidelity curves below.

The integrator is Euler-Maruyama on the matrix form (the normative
definition; the Bloch form is a cross-validated reduction), with per-step
trace renormalization and projection back into the Bloch ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bloch import FULLY_MIXED, DensityMatrix, Vec3, _PAULI, _dot
from .montecarlo import derive_stream
from .povm import MeasurementSettings

# Euler-Maruyama steps above this are refused outright.
DEFAULT_DT_MAX = 1e-3

# steps per noise-generation block in ensemble runs (memory knob only)
_NOISE_BLOCK = 2048

# unit noise intensity; test hook for fault-injection sensitivity checks
_NOISE_SCALE = 1.0

_EYE2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class TimeMapping:
    """Constant-rate bookkeeping between step counts and continuous time."""

    precision: float

    def __post_init__(self):
        if not (self.precision > 0.0) or not math.isfinite(self.precision):
            raise ValueError(f"precision must be a positive real, got {self.precision!r}")

    @property
    def rate(self) -> float:
        """Measurements per unit time, 12 / precision^2."""
        return 12.0 / (self.precision * self.precision)

    def time_from_steps(self, n) -> float:
        if n < 0:
            raise ValueError(f"step count must be nonnegative, got {n!r}")
        return 12.0 * n / (self.precision * self.precision)

    def steps_for_time(self, t) -> float:
        if t < 0:
            raise ValueError(f"time must be nonnegative, got {t!r}")
        return t * self.precision * self.precision / 12.0


def time_from_steps(n, settings: MeasurementSettings) -> float:
    """t = 12 n / precision^2 for n measurements."""
    return TimeMapping(settings.precision).time_from_steps(n)


def _saturation_ratio(y):
    """(e^y - 1)/(e^y - 1/3), evaluated overflow-free for all y >= 0."""
    x = np.expm1(-np.asarray(y, dtype=float))
    return 3.0 * (-x) / (2.0 - x)


def drift_purity(t):
    """Drift-only purity 1/2 + (1/2)(e^{8t} - 1)/(e^{8t} - 1/3).

    The solution of du/dt = 4(1-u)(3-u) from the fully mixed state, written
    for the purity (1+u)/2.  Accepts a scalar or an array of times.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise ValueError("drift purity is defined for nonnegative times only")
    out = 0.5 + 0.5 * _saturation_ratio(8.0 * t_arr)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def mean_fidelity_closed_form(n, settings: MeasurementSettings):
    """Closed-form mean fidelity 1/2 + (1/6)(e^q - 1)/(e^q - 1/3), q = 96 n / precision^2.

    Identical to 1/3 + (1/3) drift_purity(12 n / precision^2); rises from
    1/2 at n = 0 to the one-measurement optimum 2/3 as n grows.  Accepts a
    real (not necessarily integer) n or an array.
    """
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 0.0):
        raise ValueError("measurement count must be nonnegative")
    w = settings.precision
    out = 0.5 + (1.0 / 6.0) * _saturation_ratio(96.0 * n_arr / (w * w))
    return float(out) if np.isscalar(n) or n_arr.ndim == 0 else out


@dataclass(frozen=True)
class NoiseIncrement:
    """One isotropic Wiener increment; each component is Normal(0, dt)."""

    d_w: Vec3

    def __post_init__(self):
        object.__setattr__(self, "d_w", tuple(float(x) for x in self.d_w))


def draw_noise(rng: np.random.Generator, dt: float) -> NoiseIncrement:
    """Draw the three Wiener components for one step of size dt."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    scale = math.sqrt(dt)
    v = rng.standard_normal(3)
    return NoiseIncrement((scale * v[0], scale * v[1], scale * v[2]))


@dataclass(frozen=True)
class TrajectoryState:
    """Snapshot of a conditional trajectory, optionally with its record."""

    state: DensityMatrix
    time: float
    record: Vec3 | None = None


def _extract_bloch(rho: np.ndarray) -> np.ndarray:
    """<sigma_k> = tr[rho sigma_k] for a (B, 2, 2) batch, shape (B, 3)."""
    return np.einsum("kij,bji->bk", _PAULI, rho).real


def _step_density_batch(rho: np.ndarray, d_w: np.ndarray, dt: float) -> np.ndarray:
    """One Euler-Maruyama step of the matrix-form equation on a (B, 2, 2) batch.

    All operations are per-item, so any sub-batch reproduces the same
    trajectories bit for bit.
    """
    d_w = _NOISE_SCALE * d_w
    expect = _extract_bloch(rho)
    sig_rho = np.einsum("kij,bjl->bkil", _PAULI, rho)
    rho_sig = np.einsum("bij,kjl->bkil", rho, _PAULI)
    sig_rho_sig = np.einsum("kij,bkjl->bkil", _PAULI, rho_sig)
    double_comm = 6.0 * rho - 2.0 * sig_rho_sig.sum(axis=1)
    anti = sig_rho + rho_sig - 2.0 * expect[:, :, None, None] * rho[:, None, :, :]
    rho = rho + (-0.5 * dt) * double_comm + np.einsum("bk,bkij->bij", d_w, anti)
    trace = np.einsum("bii->b", rho).real
    rho = rho / trace[:, None, None]
    bloch = _extract_bloch(rho)
    length = np.sqrt(np.sum(bloch * bloch, axis=1))
    over = length > 1.0
    if np.any(over):
        unit = bloch[over] / length[over, None]
        rho[over] = 0.5 * (_EYE2 + np.einsum("bk,kij->bij", unit, _PAULI))
    return rho


def _check_step(dt: float, dt_max: float):
    if not (0.0 < dt <= dt_max):
        raise ValueError(f"dt must satisfy 0 < dt <= {dt_max!r}, got {dt!r}")


def sme_step(
    state: DensityMatrix, dt: float, noise: NoiseIncrement, dt_max: float = DEFAULT_DT_MAX
) -> DensityMatrix:
    """One conditional-master-equation step in matrix form.

    Euler-Maruyama update of rho, then trace renormalization and, if the
    Bloch vector left the unit ball, rescaling back onto the sphere.
    """
    _check_step(dt, dt_max)
    rho = state.matrix()[None, :, :]
    rho = _step_density_batch(rho, np.asarray(noise.d_w, dtype=float)[None, :], dt)
    bloch = _extract_bloch(rho)[0]
    return DensityMatrix.clipped(bloch)


def bloch_sde_step(
    r, dt: float, noise: NoiseIncrement, dt_max: float = DEFAULT_DT_MAX
) -> Vec3:
    """Closed-form Bloch reduction of the matrix step: dr = -4 r dt + 2 (dW - r (r.dW)).

    Agrees pathwise with `sme_step` under shared noise; kept as an
    independent code path for cross-validation.
    """
    _check_step(dt, dt_max)
    d_w = noise.d_w
    radial = _dot(r, d_w)
    out = tuple(r[i] - 4.0 * r[i] * dt + 2.0 * (d_w[i] - r[i] * radial) for i in range(3))
    length = math.sqrt(_dot(out, out))
    if length > 1.0:
        out = (out[0] / length, out[1] / length, out[2] / length)
    return out


def record_increment(state: DensityMatrix, dt: float, noise: NoiseIncrement) -> Vec3:
    """Measurement-record increment dy = <sigma> dt + dW / 2.

    `noise` must be the same increment used in the concurrent state step.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    r = state.bloch
    d_w = noise.d_w
    return (r[0] * dt + 0.5 * d_w[0], r[1] * dt + 0.5 * d_w[1], r[2] * dt + 0.5 * d_w[2])


def simulate_trajectory(
    initial: DensityMatrix,
    t_max: float,
    dt: float,
    rng: np.random.Generator,
    emit_record: bool = False,
    output_stride: int = 1,
    dt_max: float = DEFAULT_DT_MAX,
) -> list[TrajectoryState]:
    """Integrate one conditional trajectory, emitting every `output_stride` steps.

    The initial state and the final step are always emitted.  When
    emit_record is set each snapshot carries the accumulated record
    integral of <sigma> dt + dW/2 up to its time.
    """
    _check_step(dt, dt_max)
    if not (t_max > 0.0) or not math.isfinite(t_max):
        raise ValueError(f"t_max must be a positive real, got {t_max!r}")
    if output_stride < 1:
        raise ValueError(f"output stride must be at least 1, got {output_stride!r}")
    steps = max(1, int(round(t_max / dt)))
    rho = initial.matrix()[None, :, :]
    record = (0.0, 0.0, 0.0)
    out = [TrajectoryState(initial, 0.0, record if emit_record else None)]
    scale = math.sqrt(dt)
    for k in range(1, steps + 1):
        v = rng.standard_normal(3)
        d_w = np.array((scale * v[0], scale * v[1], scale * v[2]))
        if emit_record:
            r_before = _extract_bloch(rho)[0]
            record = (
                record[0] + r_before[0] * dt + 0.5 * d_w[0],
                record[1] + r_before[1] * dt + 0.5 * d_w[1],
                record[2] + r_before[2] * dt + 0.5 * d_w[2],
            )
        rho = _step_density_batch(rho, d_w[None, :], dt)
        if k % output_stride == 0 or k == steps:
            state = DensityMatrix.clipped(_extract_bloch(rho)[0])
            out.append(TrajectoryState(state, k * dt, record if emit_record else None))
    return out


def simulate_purity_ensemble(
    t_grid,
    dt: float,
    trajectories: int,
    seed: int = 0,
    base_index: int = 0,
    initial: DensityMatrix = FULLY_MIXED,
    dt_max: float = DEFAULT_DT_MAX,
) -> np.ndarray:
    """Purity of independent trajectories at the requested times.

    Returns shape (len(t_grid), trajectories).  Trajectory k advances with
    noise from derive_stream(seed, base_index + k) drawn three normals per
    step, exactly as `simulate_trajectory` would consume them, so single
    runs and ensemble runs of the same index follow identical noise and
    step arithmetic.  Grid times snap to the nearest step.
    """
    _check_step(dt, dt_max)
    t_grid = [float(t) for t in t_grid]
    if not t_grid or any(t < 0.0 for t in t_grid) or sorted(t_grid) != t_grid:
        raise ValueError("time grid must be nonempty, nonnegative, ascending")
    if trajectories < 1:
        raise ValueError(f"need at least one trajectory, got {trajectories!r}")
    steps = int(round(t_grid[-1] / dt))
    sample_at: dict[int, list[int]] = {}
    for g, t in enumerate(t_grid):
        sample_at.setdefault(int(round(t / dt)), []).append(g)

    out = np.empty((len(t_grid), trajectories))
    rho = np.broadcast_to(initial.matrix(), (trajectories, 2, 2)).copy()

    def harvest(step_index: int):
        for g in sample_at.get(step_index, ()):
            bloch = _extract_bloch(rho)
            out[g] = 0.5 * (1.0 + np.sum(bloch * bloch, axis=1))

    harvest(0)
    gens = [derive_stream(seed, base_index + k) for k in range(trajectories)]
    scale = math.sqrt(dt)
    done = 0
    while done < steps:
        m = min(_NOISE_BLOCK, steps - done)
        noise = np.stack([g.standard_normal((m, 3)) for g in gens], axis=1) * scale
        for j in range(m):
            rho = _step_density_batch(rho, noise[j], dt)
            harvest(done + j + 1)
        done += m
    return out
