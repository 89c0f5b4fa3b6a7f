"""Stochastic trajectories of single atoms in phase-diffusing light.

The field seen by every atom is Omega(t) = Omega0 * exp(-i*phi(t)) with phi a
Wiener process of diffusion coefficient delta (the spectrum's FWHM). One
trajectory integrates

    dn/dt     = -a*(n+1) - i*Omega0*(sigma*e^{i phi} - conj(sigma)*e^{-i phi})
    dsigma/dt = -gamma_perp*sigma - (i/2)*Omega0*n*e^{-i phi}
    dphi      = sqrt(delta) dW

Noise enters only through phi, which is exactly integrable: each step draws
phi += sqrt(delta*dt)*z with z standard normal, and (n, sigma) advance with a
deterministic implicit-midpoint step evaluated at the mid-step phase
phi + dphi/2. The inner fixed-point iteration runs a fixed 8 sweeps (so a
trajectory's arithmetic never depends on what else shares its batch) and must
reach residual < 1e-12 or the step fails loudly.

Reproducibility contract: trajectory i draws from a Philox stream keyed by
(seed, i); normals are produced by the Box-Muller cosine branch, one uniform
pair per normal, in fixed chunks of NOISE_CHUNK steps. Ensemble statistics are
reduced per fixed-size trajectory block and the blocks are merged pairwise in
index order, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .params import SystemParams

BLOCK_TRAJ = 8192      # trajectories integrated together; independent of --threads
NOISE_CHUNK = 1024     # steps drawn per stream call; fixed so noise is batch independent
FIXED_POINT_ITERS = 8
FIXED_POINT_TOL = 1e-12

_U64 = 0xFFFFFFFFFFFFFFFF


class IntegratorError(RuntimeError):
    """A trajectory step failed to converge or produced unphysical values."""


@dataclass(frozen=True)
class AtomState:
    """Instantaneous (n, sigma, phi) of one trajectory. Immutable."""

    n: float
    sigma: complex
    phi: float


class RngStream:
    """Counter-based random stream for one trajectory.

    Output is a pure function of (seed, index, position): the stream wraps a
    Philox generator keyed by the pair, and every normal consumes exactly one
    uniform pair (Box-Muller, cosine branch), so the j-th normal is the same
    no matter how draws are chunked into calls.
    """

    def __init__(self, seed: int, index: int = 0):
        self.seed = seed & _U64
        self.index = index & _U64
        key = np.array([self.seed, self.index], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, count: int) -> np.ndarray:
        """``count`` samples uniform on [0, 1)."""
        return self._gen.random(count)

    def normals(self, count: int) -> np.ndarray:
        u = self._gen.random(2 * count)
        u1 = 1.0 - u[0::2]          # maps [0,1) onto (0,1]; keeps log finite
        u2 = u[1::2]
        z1, _ = gaussian_pair(u1, u2)
        return z1


def gaussian_pair(u1, u2):
    """Box-Muller transform of a uniform pair into two standard normals.

    z1 = sqrt(-2 ln u1) cos(2 pi u2), z2 = sqrt(-2 ln u1) sin(2 pi u2).
    Accepts scalars or arrays. u1 must lie in (0, 1] (u1 = 0 hits the log
    singularity), u2 in [0, 1).
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if np.any(u1 <= 0.0) or np.any(u1 > 1.0):
        raise ValueError("gaussian_pair: u1 must lie in (0, 1]")
    if np.any(u2 < 0.0) or np.any(u2 >= 1.0):
        raise ValueError("gaussian_pair: u2 must lie in [0, 1)")
    r = np.sqrt(-2.0 * np.log(u1))
    ang = (2.0 * math.pi) * u2
    z1 = r * np.cos(ang)
    z2 = r * np.sin(ang)
    if z1.ndim == 0:
        return float(z1), float(z2)
    return z1, z2


@dataclass
class EnsembleTrace:
    """Per-time statistics of n over an ensemble.

    n_var is the unbiased sample variance across trajectories and
    n_stderr = sqrt(n_var / n_traj). coherence_mean, when requested, is the
    ensemble mean of sigma*e^{i phi} at each grid time. final_n, when
    requested, holds every trajectory's n(t_end) in trajectory-index order.
    """

    t: np.ndarray
    n_mean: np.ndarray
    n_var: np.ndarray
    n_stderr: np.ndarray
    n_traj: int
    coherence_mean: np.ndarray | None = None
    final_n: np.ndarray | None = None


# ----------------------------------------------------------------------
# core stepping kernel (vectorized over trajectories; width 1 for scalars)

def _midpoint_step(n, sigma, phi, z, a, gamma_perp, delta, omega0, dt, step_label):
    """One step of every trajectory in the arrays. Returns (n, sigma, phi).

    The fixed-point sweep count is constant (not adaptive) so each
    trajectory's arithmetic is independent of its neighbours in the block.
    """
    dphi = math.sqrt(delta * dt) * z
    e_mid = np.exp(1j * (phi + 0.5 * dphi))
    drive_coeff = (-0.5j * omega0) * np.conj(e_mid)   # multiplies n in dsigma/dt

    n1 = n
    s1 = sigma
    res_n = res_s = math.inf
    for it in range(FIXED_POINT_ITERS):
        nm = 0.5 * (n + n1)
        sm = 0.5 * (sigma + s1)
        n_next = n + dt * (-a * (nm + 1.0) + 2.0 * omega0 * (sm * e_mid).imag)
        s_next = sigma + dt * (drive_coeff * nm - gamma_perp * sm)
        if it == FIXED_POINT_ITERS - 1:
            res_n = float(np.max(np.abs(n_next - n1)))
            res_s = float(np.max(np.abs(s_next - s1)))
        n1 = n_next
        s1 = s_next
    residual = max(res_n, res_s)
    if not residual < FIXED_POINT_TOL:
        raise IntegratorError(
            f"implicit midpoint did not converge at step {step_label} "
            f"(residual {residual:.3e} after {FIXED_POINT_ITERS} iterations); "
            f"reduce dt"
        )
    return n1, s1, phi + dphi


def step_trajectory(state: AtomState, params: SystemParams, dt: float,
                    rng: RngStream) -> AtomState:
    """Advance one trajectory by one step of size dt.

    The phase moves by an exact Wiener increment sqrt(delta*dt)*z; (n, sigma)
    take a deterministic implicit-midpoint step at the mid-step phase. Same
    seed and inputs give a bit-identical output state.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = rng.normals(1)
    n, sigma, phi = _midpoint_step(
        np.array([state.n]), np.array([state.sigma], dtype=complex),
        np.array([state.phi]), z,
        params.a, params.gamma_perp, params.delta, params.omega0, dt,
        step_label="(single)",
    )
    return AtomState(n=float(n[0]), sigma=complex(sigma[0]), phi=float(phi[0]))


# ----------------------------------------------------------------------
# streaming statistics: per-block direct moments, Chan merge across blocks

def _merge_moments(left, right):
    """Combine two (count, mean, m2) moment triples (vectorized over time)."""
    c1, m1, s1 = left
    c2, m2, s2 = right
    c = c1 + c2
    d = m2 - m1
    mean = m1 + d * (c2 / c)
    m2c = s1 + s2 + d * d * (c1 * c2 / c)
    return c, mean, m2c


def _tree_merge(items):
    """Pairwise merge in fixed order; result independent of worker count."""
    items = list(items)
    if not items:
        raise ValueError("nothing to merge")
    while len(items) > 1:
        nxt = []
        for i in range(0, len(items) - 1, 2):
            nxt.append(_merge_moments(items[i], items[i + 1]))
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def _block_moments(values: np.ndarray, axis: int = 0):
    """Exact (count, mean, m2) of one block along ``axis``."""
    count = values.shape[axis]
    mean = values.mean(axis=axis)
    m2 = ((values - np.expand_dims(mean, axis)) ** 2).sum(axis=axis)
    return count, mean, m2


def _var_stderr(count, m2):
    var = m2 / (count - 1) if count > 1 else np.zeros_like(m2)
    return var, np.sqrt(var / count)


def _steps_for(t_value: float, dt: float, name: str) -> int:
    steps = int(round(t_value / dt))
    if abs(steps * dt - t_value) > 1e-9 * max(1.0, abs(t_value)):
        raise ValueError(f"{name}={t_value} is not a multiple of dt={dt}")
    return steps


# ----------------------------------------------------------------------
# block integration

def _run_block(params, seed, idx_lo, idx_hi, n_steps, dt, n0, sigma0, phi0,
               want_coherence, snap_steps):
    """Integrate trajectories [idx_lo, idx_hi) and reduce them on the fly.

    Returns per-block moment triple for n(t), optional coherence sums,
    optional snapshot arrays at the requested step indices, and the final
    (n, phi) of every trajectory.
    """
    a, gperp = params.a, params.gamma_perp
    delta, omega0 = params.delta, params.omega0
    width = idx_hi - idx_lo
    streams = [RngStream(seed, i) for i in range(idx_lo, idx_hi)]

    n = np.full(width, float(n0))
    sigma = np.full(width, complex(sigma0), dtype=complex)
    phi = np.full(width, float(phi0))

    mean = np.empty(n_steps + 1)
    m2 = np.empty(n_steps + 1)
    coh = np.empty(n_steps + 1, dtype=complex) if want_coherence else None
    snap_lookup = {s: j for j, s in enumerate(snap_steps)}
    snap_n = np.empty((width, len(snap_steps))) if snap_steps else None
    snap_phi = np.empty((width, len(snap_steps))) if snap_steps else None

    bound_n = 1.0 + 10.0 * dt
    bound_s = 0.5 + 10.0 * dt

    def record(k):
        _, mean[k], m2[k] = _block_moments(n)  # count == width by construction
        if coh is not None:
            coh[k] = (sigma * np.exp(1j * phi)).sum()
        j = snap_lookup.get(k)
        if j is not None:
            snap_n[:, j] = n
            snap_phi[:, j] = phi

    record(0)
    step = 0
    for chunk_lo in range(0, n_steps, NOISE_CHUNK):
        clen = min(NOISE_CHUNK, n_steps - chunk_lo)
        z = np.empty((width, clen))
        for i, stream in enumerate(streams):
            z[i] = stream.normals(clen)
        for j in range(clen):
            step += 1
            n, sigma, phi = _midpoint_step(
                n, sigma, phi, z[:, j], a, gperp, delta, omega0, dt,
                step_label=f"{step} (t={step * dt:g})",
            )
            record(step)
        # sanity bounds once per chunk; the comparison is written so NaN fails it
        max_n = float(np.max(np.abs(n)))
        max_s = float(np.max(np.abs(sigma)))
        if not (max_n <= bound_n and max_s <= bound_s):
            raise IntegratorError(
                f"trajectory left the Bloch sphere by step {step} "
                f"(max|n|={max_n:.6g}, max|sigma|={max_s:.6g}); reduce dt"
            )

    return {
        "moments": (width, mean, m2),
        "coh_sum": coh,
        "snap_n": snap_n,
        "snap_phi": snap_phi,
        "final_n": n,
        "final_phi": phi,
    }


def _run_blocks(params, n_traj, n_steps, dt, seed, n0, sigma0, phi0,
                want_coherence=False, snap_steps=(), threads=1):
    """Run all trajectory blocks (possibly on a thread pool) in fixed order."""
    spans = [(lo, min(lo + BLOCK_TRAJ, n_traj)) for lo in range(0, n_traj, BLOCK_TRAJ)]

    def job(span):
        lo, hi = span
        return _run_block(params, seed, lo, hi, n_steps, dt, n0, sigma0, phi0,
                          want_coherence, tuple(snap_steps))

    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, spans))   # collected in block order
    else:
        results = [job(s) for s in spans]
    return results


def run_ensemble(params: SystemParams, n_traj: int, t_end: float, dt: float,
                 seed: int, *, n0: float = -1.0, sigma0: complex = 0j,
                 phi0: float = 0.0, threads: int = 1,
                 with_coherence: bool = False,
                 keep_final: bool = False) -> EnsembleTrace:
    """Ensemble statistics of n(t) over ``n_traj`` independent trajectories.

    Default initial condition is the cold ground state n=-1, sigma=0, phi=0.
    Deterministic: the same (params, n_traj, t_end, dt, seed) give the same
    trace bit for bit, for any ``threads``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    n_steps = _steps_for(t_end, dt, "t_end")
    results = _run_blocks(params, n_traj, n_steps, dt, seed, n0, sigma0, phi0,
                          want_coherence=with_coherence, threads=threads)

    count, mean, m2 = _tree_merge([r["moments"] for r in results])
    if not np.all(np.isfinite(mean)):
        raise IntegratorError("ensemble mean is not finite")
    var, stderr = _var_stderr(count, m2)

    coherence = None
    if with_coherence:
        total = np.zeros(n_steps + 1, dtype=complex)
        for r in results:            # fixed block order
            total += r["coh_sum"]
        coherence = total / count

    final = np.concatenate([r["final_n"] for r in results]) if keep_final else None
    t = np.arange(n_steps + 1) * dt
    return EnsembleTrace(t=t, n_mean=mean, n_var=var, n_stderr=stderr,
                         n_traj=count, coherence_mean=coherence, final_n=final)


@dataclass
class TrajectoryTrace:
    t: np.ndarray
    n: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray


def run_trajectory(params: SystemParams, t_end: float, dt: float, seed: int,
                   index: int = 0, *, n0: float = -1.0, sigma0: complex = 0j,
                   phi0: float = 0.0,
                   increments: np.ndarray | None = None) -> TrajectoryTrace:
    """Full history of a single trajectory.

    Uses the same chunked noise drawing as the batch path, so trajectory
    ``index`` here is the exact trajectory that run_ensemble folds into its
    statistics. ``increments`` substitutes an explicit array of standard
    normals (one per step) for the stream, which lets tests refine a noise
    path: the coarse path over dt is recovered from the fine path over dt/2
    by summing adjacent increments.
    """
    n_steps = _steps_for(t_end, dt, "t_end")
    if increments is not None:
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (n_steps,):
            raise ValueError(f"increments must have shape ({n_steps},)")
    stream = RngStream(seed, index) if increments is None else None

    n = np.array([float(n0)])
    sigma = np.array([complex(sigma0)], dtype=complex)
    phi = np.array([float(phi0)])
    out_n = np.empty(n_steps + 1)
    out_s = np.empty(n_steps + 1, dtype=complex)
    out_p = np.empty(n_steps + 1)
    out_n[0], out_s[0], out_p[0] = n[0], sigma[0], phi[0]

    step = 0
    for chunk_lo in range(0, n_steps, NOISE_CHUNK):
        clen = min(NOISE_CHUNK, n_steps - chunk_lo)
        if stream is not None:
            z = stream.normals(clen)
        else:
            z = increments[chunk_lo:chunk_lo + clen]
        for j in range(clen):
            step += 1
            n, sigma, phi = _midpoint_step(
                n, sigma, phi, z[j:j + 1], params.a, params.gamma_perp,
                params.delta, params.omega0, dt,
                step_label=f"{step} (t={step * dt:g})",
            )
            out_n[step], out_s[step], out_p[step] = n[0], sigma[0], phi[0]

    t = np.arange(n_steps + 1) * dt
    return TrajectoryTrace(t=t, n=out_n, sigma=out_s, phi=out_p)


# ----------------------------------------------------------------------
# phase-only helpers (the phase decouples from (n, sigma))

def simulate_phases(delta: float, n_traj: int, t_end: float, dt: float,
                    seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Wiener phase paths phi(t) for ``n_traj`` trajectories, shape (N, steps+1).

    Uses the same streams as run_ensemble, so these are the phases the full
    simulation would see.
    """
    n_steps = _steps_for(t_end, dt, "t_end")
    scale = math.sqrt(delta * dt)
    phi = np.empty((n_traj, n_steps + 1))
    phi[:, 0] = 0.0
    for i in range(n_traj):
        stream = RngStream(seed, i)
        z = np.concatenate([
            stream.normals(min(NOISE_CHUNK, n_steps - lo))
            for lo in range(0, n_steps, NOISE_CHUNK)
        ]) if n_steps else np.empty(0)
        np.cumsum(scale * z, out=phi[i, 1:])
    t = np.arange(n_steps + 1) * dt
    return t, phi


@dataclass
class PhaseAutocorrelation:
    tau: np.ndarray
    mean: np.ndarray          # complex ensemble mean of e^{i[phi(tau)-phi(0)]}
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    n_traj: int


def phase_autocorrelation(delta: float, n_traj: int, tau_grid,
                          seed: int) -> PhaseAutocorrelation:
    """Estimate <e^{i[phi(t+tau)-phi(t)]}> on the given non-negative tau grid.

    Wiener increments are stationary, so the grid is sampled exactly (no dt):
    each trajectory draws the increments between consecutive tau points.
    The expected value is exp(-delta*|tau|/2).
    """
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or len(tau) == 0:
        raise ValueError("tau_grid must be a non-empty 1-d array")
    if np.any(tau < 0) or np.any(np.diff(tau) <= 0):
        raise ValueError("tau_grid must be non-negative and strictly increasing")

    gaps = np.diff(np.concatenate([[0.0], tau]))
    scale = np.sqrt(delta * gaps)
    parts = []
    for lo in range(0, n_traj, BLOCK_TRAJ):
        hi = min(lo + BLOCK_TRAJ, n_traj)
        z = np.empty((hi - lo, len(tau)))
        for i in range(lo, hi):
            z[i - lo] = RngStream(seed, i).normals(len(tau))
        phases = np.cumsum(scale * z, axis=1)
        samples = np.exp(1j * phases)
        parts.append((_block_moments(samples.real), _block_moments(samples.imag)))

    count, mean_re, m2_re = _tree_merge([p[0] for p in parts])
    _, mean_im, m2_im = _tree_merge([p[1] for p in parts])
    _, se_re = _var_stderr(count, m2_re)
    _, se_im = _var_stderr(count, m2_im)
    return PhaseAutocorrelation(tau=tau, mean=mean_re + 1j * mean_im,
                                stderr_re=se_re, stderr_im=se_im, n_traj=count)


# ----------------------------------------------------------------------
# decorrelation diagnostic

@dataclass
class DecorrelationResult:
    """Two-time correlation test at fixed observation time t.

    k_mean estimates K(t,t') = Re<Omega(t)Omega*(t')n(t')>, c_mean estimates
    the bare field autocorrelation C(t,t'), n_mean the mean inversion at t'.
    residual = k_mean - c_mean*n_mean; residual_stderr is the K estimator's
    standard error, which sets the verdict scale. Estimators are accumulated
    on the unit-modulus phase factors and scaled by Omega0**2 afterwards, so
    residual(t'=t) is exactly zero.
    """

    t: float
    t_prime: np.ndarray
    k_mean: np.ndarray
    k_stderr: np.ndarray
    c_mean: np.ndarray
    c_stderr: np.ndarray
    n_mean: np.ndarray
    n_stderr: np.ndarray
    residual: np.ndarray
    residual_stderr: np.ndarray
    n_traj: int
    holds_3sigma: bool
    low_statistics: bool


def decorrelation_residual(params: SystemParams, n_traj: int, t: float,
                           t_prime_grid, seed: int, *, dt: float,
                           threads: int = 1) -> DecorrelationResult:
    """Measure the factorization error K(t,t') - C(t,t')*n_mean(t').

    t and every t' must sit on the dt grid, with t >= max(t'). The verdict
    holds_3sigma is max|residual| <= 3*residual_stderr over the grid.
    """
    t_prime = np.asarray(t_prime_grid, dtype=float)
    if t_prime.ndim != 1 or len(t_prime) == 0:
        raise ValueError("t_prime_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_prime) <= 0):
        raise ValueError("t_prime_grid must be strictly increasing")
    if t < t_prime[-1]:
        raise ValueError("observation time t must be >= max(t_prime_grid)")

    n_steps = _steps_for(t, dt, "t")
    snap_steps = tuple(_steps_for(tp, dt, "t_prime") for tp in t_prime)
    results = _run_blocks(params, n_traj, n_steps, dt, seed,
                          n0=-1.0, sigma0=0j, phi0=0.0,
                          snap_steps=snap_steps, threads=threads)

    k_parts, c_parts, n_parts = [], [], []
    for r in results:
        u = np.exp(-1j * (r["final_phi"][:, None] - r["snap_phi"]))
        k_parts.append(_block_moments((u * r["snap_n"]).real))
        c_parts.append(_block_moments(u.real))
        n_parts.append(_block_moments(r["snap_n"]))

    count, k_mean, k_m2 = _tree_merge(k_parts)
    _, c_mean, c_m2 = _tree_merge(c_parts)
    _, n_mean, n_m2 = _tree_merge(n_parts)
    _, k_se = _var_stderr(count, k_m2)
    _, c_se = _var_stderr(count, c_m2)
    _, n_se = _var_stderr(count, n_m2)

    w2 = params.omega0 ** 2
    residual = w2 * (k_mean - c_mean * n_mean)
    residual_se = w2 * k_se
    holds = bool(np.all(np.abs(residual) <= 3.0 * residual_se))
    return DecorrelationResult(
        t=t, t_prime=t_prime,
        k_mean=w2 * k_mean, k_stderr=w2 * k_se,
        c_mean=w2 * c_mean, c_stderr=w2 * c_se,
        n_mean=n_mean, n_stderr=n_se,
        residual=residual, residual_stderr=residual_se,
        n_traj=count, holds_3sigma=holds,
        low_statistics=count < 100,
    )
