"""Time evolution of spin states.

Static Hamiltonians use, in order of preference:

* a product of exact single-site rotations when there is no Ising term,
* phases in the Hadamard-rotated basis when every term is along x,
* dense eigendecomposition up to ``max_dense_dim``,
* adaptive Lanczos (Krylov) stepping above that.

A ``ModulatedField`` term switches to a fixed-step exponential midpoint
integrator, ``psi <- exp(-i h H(t + h/2)) psi``. The step bound keeps
``h |H| <= 1/50``, so each step exponential is applied by a Taylor series
summed to round-off; when the static part is diagonal in the x basis the
steps run in the Hadamard frame, where that part is a plain diagonal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ..errors import ConvergenceError, KrylovConvergenceError, StepBoundError
from .basis import PAULI, apply_local, hadamard_all
from .operators import HamiltonianSpec, UniformField, compile_spec, matvec, to_dense, x_diagonal_energies
from .state import SpinState

METHODS = ("auto", "exact", "krylov")


@dataclass(frozen=True)
class Propagator:
    method: str = "auto"
    krylov_dim: int = 30
    tol: float = 1e-10
    max_dense_dim: int = 1024
    steps_per_unit: float = 50.0
    max_step: float | None = None
    max_krylov_steps: int = 100_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.krylov_dim < 2:
            raise ValueError("krylov_dim must be >= 2")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.steps_per_unit > 0:
            raise ValueError("steps_per_unit must be positive")

    def use_dense(self, dim: int) -> bool:
        if self.method == "exact":
            return True
        if self.method == "krylov":
            return False
        return dim <= self.max_dense_dim


DEFAULT = Propagator()


def _local_unitary(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t (hx X + hy Y + hz Z)) in closed form."""
    r = float(np.linalg.norm(h))
    if r == 0:
        return np.eye(2, dtype=complex)
    gen = (h[0] * PAULI["x"] + h[1] * PAULI["y"] + h[2] * PAULI["z"]) / r
    return math.cos(r * t) * np.eye(2) - 1j * math.sin(r * t) * gen


def _product_evolve(psi: np.ndarray, spec: HamiltonianSpec, t: float) -> np.ndarray:
    n = spec.n_spins
    fields = spec.local_fields()
    for i in range(n):
        if np.any(fields[i]):
            psi = apply_local(psi, n, i, _local_unitary(fields[i], t))
    return psi


def _x_diagonal_evolve(psi: np.ndarray, n: int, energies: np.ndarray, t: float) -> np.ndarray:
    return hadamard_all(np.exp(-1j * t * energies) * hadamard_all(psi, n), n)


def _eig(spec: HamiltonianSpec):
    return np.linalg.eigh(to_dense(spec))


def krylov_expm(apply, psi: np.ndarray, t: float, m: int = 30, tol: float = 1e-10, max_steps: int = 100_000) -> np.ndarray:
    """``exp(-i t H) psi`` for Hermitian ``H`` given only ``apply(v) = H v``.

    Lanczos with full reorthogonalization; the step is subdivided until the
    standard a-posteriori error estimate ``beta * h_{m+1,m} |e_m^T exp(-i tau T) e_1|``
    falls below ``tol * tau / t``.
    """
    psi = np.array(psi, dtype=complex)
    if t == 0:
        return psi
    dim = psi.shape[0]
    m = min(m, dim)
    sign = 1.0 if t > 0 else -1.0
    total = abs(t)
    done, tau, steps = 0.0, total, 0
    while done < total * (1 - 1e-15):
        steps += 1
        if steps > max_steps:
            raise KrylovConvergenceError(f"Krylov propagation exceeded {max_steps} substeps")
        beta = np.linalg.norm(psi)
        v = np.zeros((m + 1, dim), dtype=complex)
        v[0] = psi / beta
        alpha = np.zeros(m)
        off = np.zeros(m)
        k_used = m
        breakdown = False
        for k in range(m):
            w = apply(v[k])
            alpha[k] = np.vdot(v[k], w).real
            w = w - alpha[k] * v[k] - (off[k - 1] * v[k - 1] if k else 0)
            # full reorthogonalization
            w -= v[: k + 1].T @ (v[: k + 1].conj() @ w)
            off[k] = np.linalg.norm(w)
            if off[k] < 1e-13 * max(1.0, abs(alpha[k])):
                k_used = k + 1
                breakdown = True
                break
            v[k + 1] = w / off[k]
        a = alpha[:k_used]
        b = off[: k_used - 1]
        if k_used == 1:
            evals, evecs = a.copy(), np.ones((1, 1))
        else:
            evals, evecs = eigh_tridiagonal(a, b)
        tau = min(tau, total - done)
        while True:
            coef = evecs @ (np.exp(-1j * sign * tau * evals) * evecs[0].conj())
            err = 0.0 if breakdown else beta * off[k_used - 1] * abs(coef[-1])
            if err <= tol * tau / total or tau < total * 1e-14:
                break
            tau *= 0.5
        if tau < total * 1e-14 and err > tol * tau / total:
            raise KrylovConvergenceError(f"Krylov step collapsed below resolution (error estimate {err:.3e})")
        psi = beta * (coef @ v[:k_used])
        done += tau
        # let the step grow again when comfortably converged
        if err < 0.1 * tol * tau / total:
            tau *= 2
    return psi


def _static_evolve(psi: np.ndarray, spec: HamiltonianSpec, t: float, prop: Propagator) -> np.ndarray:
    n = spec.n_spins
    if not spec.has_ising():
        return _product_evolve(psi, spec, t)
    ex = x_diagonal_energies(spec)
    if ex is not None:
        return _x_diagonal_evolve(psi, n, ex, t)
    if prop.use_dense(1 << n):
        e, v = _eig(spec)
        return v @ (np.exp(-1j * e * t) * (v.conj().T @ psi))
    return krylov_expm(matvec(spec), psi, t, prop.krylov_dim, prop.tol, prop.max_krylov_steps)


def step_count(spec: HamiltonianSpec, duration: float, prop: Propagator = DEFAULT) -> int:
    """Number of midpoint steps so that ``h <= 1 / (steps_per_unit * max(nu_p, |H|))``."""
    mod = spec.modulated
    scale = max(abs(mod.frequency) if mod else 0.0, spec.norm_bound())
    if scale == 0:
        return 1
    h_max = 1.0 / (prop.steps_per_unit * scale)
    if prop.max_step is not None:
        if prop.max_step > h_max:
            raise StepBoundError(f"requested step {prop.max_step:.3g} exceeds the stability bound {h_max:.3g}")
        h_max = prop.max_step
    return max(1, math.ceil(abs(duration) / h_max - 1e-12))


# H sigma^a H = -sigma^b for the all-site Hadamard H in the (down, up) bit order
_FRAME_AXIS = {"x": "z", "y": "y", "z": "x"}
TAYLOR_TOL = 1e-15
TAYLOR_MAX_TERMS = 60


def taylor_expm(apply, psi: np.ndarray, h: float, tol: float = TAYLOR_TOL, max_terms: int = TAYLOR_MAX_TERMS) -> np.ndarray:
    """``exp(-i h H) psi`` by its Taylor series, summed until the next term is below ``tol``.

    Meant for ``h |H| <~ 1``, which the midpoint step bound guarantees. ``psi``
    may hold one state per column.
    """
    out = np.array(psi, dtype=complex)
    term = out
    for k in range(1, max_terms + 1):
        term = (-1j * h / k) * apply(term)
        out = out + term
        if np.max(np.linalg.norm(term, axis=0)) <= tol:
            return out
    raise ConvergenceError(f"Taylor series for a step of {h:.3g} did not converge in {max_terms} terms")


def _column(v: np.ndarray, like: np.ndarray) -> np.ndarray:
    return v if like.ndim == 1 else v[:, None]


def _split_ops(static: HamiltonianSpec, axis: str, prop: Propagator):
    """Operators for ``H(s) = A + s * sum_i sigma_i^axis``, possibly in the Hadamard frame.

    Returns ``(to_frame, from_frame, apply_a, apply_b)``.
    """
    n = static.n_spins
    ex = x_diagonal_energies(static)
    if ex is not None:
        b = matvec(HamiltonianSpec(n, (UniformField(_FRAME_AXIS[axis], -1.0),)))
        frame = lambda p: hadamard_all(p, n)  # noqa: E731  (self-inverse)
        return frame, frame, (lambda p: _column(ex, p) * p), b
    if prop.use_dense(1 << n):
        h0 = to_dense(static)
        a = lambda p: h0 @ p  # noqa: E731
    else:
        a = matvec(static)
    same = lambda p: p  # noqa: E731
    return same, same, a, matvec(HamiltonianSpec(n, (UniformField(axis, 1.0),)))


def _midpoint_batch(psi, static, axis, coefficient, duration, n_steps, prop, t0=0.0):
    """Midpoint exponential steps for ``static + coefficient(t) * sum sigma^axis``.

    ``coefficient`` maps a time to a scalar or to one value per column of ``psi``.
    """
    to_frame, from_frame, a, b = _split_ops(static, axis, prop)
    h = duration / n_steps
    phi = to_frame(psi)
    for k in range(n_steps):
        s = coefficient(t0 + (k + 0.5) * h)
        phi = taylor_expm(lambda v: a(v) + s * b(v), phi, h)
    return from_frame(phi)


def _modulated_evolve(psi, spec, duration, prop, t0=0.0):
    mod = spec.modulated
    n_steps = step_count(spec, duration, prop)
    return _midpoint_batch(psi, spec.static_part(), mod.axis, mod.coefficient, duration, n_steps, prop, t0)


def evolve(state: SpinState, spec: HamiltonianSpec, duration: float, prop: Propagator = DEFAULT, t0: float = 0.0) -> SpinState:
    """``|psi(t0 + duration)> = U |psi(t0)>``.

    ``t0`` only matters for time-dependent specs.

    Raises
    ------
    StepBoundError
        If ``prop.max_step`` is larger than the integrator bound.
    KrylovConvergenceError
        If Krylov stepping cannot reach the requested tolerance.
    """
    if spec.n_spins != state.n_spins:
        raise ValueError(f"spec acts on {spec.n_spins} spins, state has {state.n_spins}")
    if duration == 0:
        return state
    if spec.is_static:
        out = _static_evolve(state.amplitudes, spec, duration, prop)
    else:
        out = _modulated_evolve(state.amplitudes, spec, duration, prop, t0=t0)
    return SpinState(state.n_spins, out)


def evolve_times(state: SpinState, spec: HamiltonianSpec, times: Sequence[float], prop: Propagator = DEFAULT) -> np.ndarray:
    """States at each of ``times`` (measured from ``state``) as a ``(len(times), dim)`` array.

    Static specs only. The dense path diagonalizes once for all times.
    """
    if not spec.is_static:
        raise ValueError("evolve_times needs a static Hamiltonian; use evolve for modulated fields")
    times = np.asarray(times, dtype=float)
    psi0 = state.amplitudes
    n = spec.n_spins
    if spec.has_ising() and x_diagonal_energies(spec) is None and prop.use_dense(1 << n):
        e, v = _eig(spec)
        c = v.conj().T @ psi0
        return (v @ (np.exp(-1j * np.outer(e, times)) * c[:, None])).T
    out = np.empty((len(times), 1 << n), dtype=complex)
    order = np.argsort(times, kind="stable")
    psi, t_prev = psi0, 0.0
    for k in order:
        psi = _static_evolve(psi, spec, times[k] - t_prev, prop) if times[k] != t_prev else psi
        t_prev = times[k]
        out[k] = psi
    return out


def _static_key(spec: HamiltonianSpec) -> tuple:
    c = compile_spec(spec.static_part())
    return (spec.modulated.axis, c.diag.tobytes(), tuple(c.masks), tuple(np.asarray(x).tobytes() for x in c.coeffs))


def evolve_many(state: SpinState, specs: Sequence[HamiltonianSpec], duration: float, prop: Propagator = DEFAULT) -> list[SpinState]:
    """Evolve one initial state under several Hamiltonians for the same duration.

    Modulated specs that differ only in their modulated term are integrated
    together, one state per column; each group uses the step of its most
    demanding member, which is at least as fine as every member's own bound.
    """
    specs = list(specs)
    out: list = [None] * len(specs)
    groups: dict = {}
    for k, s in enumerate(specs):
        if s.n_spins != state.n_spins:
            raise ValueError(f"spec acts on {s.n_spins} spins, state has {state.n_spins}")
        if s.is_static or duration == 0:
            out[k] = evolve(state, s, duration, prop)
        else:
            groups.setdefault(_static_key(s), []).append(k)
    for members in groups.values():
        mods = [specs[k].modulated for k in members]
        static = np.array([m.static for m in mods])
        amp = np.array([m.amplitude for m in mods])
        freq = np.array([m.frequency for m in mods])
        n_steps = max(step_count(specs[k], duration, prop) for k in members)
        psi = np.repeat(state.amplitudes[:, None], len(members), axis=1)
        psi = _midpoint_batch(
            psi,
            specs[members[0]].static_part(),
            mods[0].axis,
            lambda t: static + amp * np.sin(2 * np.pi * freq * t),
            duration,
            n_steps,
            prop,
        )
        for col, k in enumerate(members):
            out[k] = SpinState(state.n_spins, psi[:, col])
    return out
