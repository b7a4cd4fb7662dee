"""Dissipative dynamics of the NV ground-state spin in the co-rotating frame.

The effective Hamiltonian after moving to the body frame and dropping
counter-rotating drive terms is, in units of hbar,

    H = (D - w) Sz^2 - [B0z(alpha,beta) + alpha_dot cos(beta)] Sz
        - g1(alpha,beta)*2 Sx/... (see ``SpinHamiltonian`` fields)

with B0z = (gammaB0/sqrt 2)(cos(alpha) sin(beta) + cos(beta)) the
projection of the static field on the spin axis, and the drive
couplings g1 = (gammaB1/2) cos(alpha) cos(beta), g2 = (gammaB1/2) sin(alpha).

Dissipation is phenomenological: the optically pumped level |+1> loses
population at rate Gamma (gained by |0>), and the |0><+1| coherence
decays at Gamma1.  Far-detuned |-1> is dropped in the two-level
reduction; a three-level mode with a symmetric dissipator bounds the
reduction error.

Basis ordering is fixed as {|-1>, |0>, |+1>} everywhere.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .config import SystemConfig

SQRT2 = math.sqrt(2.0)

# spin-1 operators, basis {|-1>, |0>, |+1>}
SZ = np.diag([-1.0, 0.0, 1.0]).astype(complex)
SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / SQRT2
SY = np.array([[0, 1j, 0], [-1j, 0, 1j], [0, -1j, 0]], dtype=complex) / SQRT2


class IntegrationError(RuntimeError):
    """Integrator failed to reach the requested time at the set tolerance."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


@dataclass(frozen=True)
class SpinHamiltonian:
    """Rotating-frame effective Hamiltonian parameters at one orientation.

    ``doppler`` (= alpha_dot*cos(beta)) is carried separately from
    ``delta_plus`` so callers can evaluate the same orientation at rest.
    All entries in rad/s.
    """

    delta_plus: float
    delta_minus: float
    g1: float
    g2: float
    doppler: float
    alpha: float
    beta: float

    @property
    def coupling_sq(self) -> float:
        return self.g1**2 + self.g2**2

    def two_level_matrix(self, include_doppler: bool = True) -> np.ndarray:
        """2x2 block over {|0>, |+1>} (rad/s)."""
        d = self.delta_plus - (self.doppler if include_doppler else 0.0)
        od = (-self.g1 + 1j * self.g2) / SQRT2
        return np.array([[0.0, od], [np.conj(od), d]], dtype=complex)

    def three_level_matrix(self, include_doppler: bool = True) -> np.ndarray:
        """Full 3x3 matrix over {|-1>, |0>, |+1>} (rad/s)."""
        dw = 0.5 * (self.delta_plus + self.delta_minus)  # = D - omega
        hz = dw - self.delta_plus + (self.doppler if include_doppler else 0.0)
        g1, g2 = self.g1, self.g2
        return dw * SZ @ SZ - hz * SZ - g1 * SX + g2 * SY


def build_hamiltonian(cfg: SystemConfig, alpha: float, beta: float,
                      alpha_dot: float = 0.0) -> SpinHamiltonian:
    """Evaluate the effective Hamiltonian at orientation (alpha, beta)."""
    dw = cfg.detuning_offset
    b0z = cfg.zeeman_B0 / SQRT2 * (math.cos(alpha) * math.sin(beta) + math.cos(beta))
    return SpinHamiltonian(
        delta_plus=dw - b0z,
        delta_minus=dw + b0z,
        g1=0.5 * cfg.zeeman_B1 * math.cos(alpha) * math.cos(beta),
        g2=0.5 * cfg.zeeman_B1 * math.sin(alpha),
        doppler=alpha_dot * math.cos(beta),
        alpha=alpha,
        beta=beta,
    )


class SpinState:
    """Density matrix of the ground-state triplet with a two-level view."""

    __slots__ = ("rho",)

    def __init__(self, rho: np.ndarray):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (3, 3):
            raise ValueError("SpinState expects a 3x3 density matrix")
        self.rho = rho

    @classmethod
    def from_two_level(cls, rho11: float, rho01: complex, rho_minus: float = 0.0):
        """Build from the {|0>, |+1>} block; |-1> holds ``rho_minus``."""
        rho = np.zeros((3, 3), dtype=complex)
        rho[0, 0] = rho_minus
        rho[2, 2] = rho11
        rho[1, 1] = 1.0 - rho11 - rho_minus
        rho[1, 2] = rho01
        rho[2, 1] = np.conj(rho01)
        return cls(rho)

    @classmethod
    def ground(cls):
        return cls.from_two_level(0.0, 0.0)

    @property
    def p00(self) -> float:
        return float(np.real(self.rho[1, 1]))

    @property
    def p11(self) -> float:
        return float(np.real(self.rho[2, 2]))

    @property
    def p_minus(self) -> float:
        return float(np.real(self.rho[0, 0]))

    @property
    def rho01(self) -> complex:
        return complex(self.rho[1, 2])

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.rho @ op))

    def validate(self, tol: float = 1e-10):
        if not np.allclose(self.rho, self.rho.conj().T, atol=tol):
            raise ValueError("density matrix is not Hermitian")
        tr = float(np.real(np.trace(self.rho)))
        if abs(tr - 1.0) > tol:
            raise ValueError(f"trace {tr} deviates from 1 beyond {tol}")
        ev = np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))
        if ev.min() < -tol:
            raise ValueError(f"negative eigenvalue {ev.min()}")
        return self


@dataclass(frozen=True)
class SteadyState:
    """Stationary two-level solution at fixed orientation and velocity."""

    p11: float
    rho01: complex
    f0: float            # saturation parameter; inf in the dark state
    dark: bool = False   # True when the drive couplings vanish


def steady_state_analytic(h: SpinHamiltonian, gamma_pump: float,
                          gamma_deph: float,
                          include_doppler: bool = False) -> SteadyState:
    """Closed-form stationary state of the two-level master equation.

    Uses the effective detuning including the rotational Doppler shift
    when requested.  In the dark-state limit g1 = g2 = 0 the pumping
    empties |+1>; this is returned with an explicit flag rather than an
    overflowing float expression.
    """
    d = h.delta_plus - (h.doppler if include_doppler else 0.0)
    gg = h.coupling_sq
    if gg == 0.0:
        return SteadyState(p11=0.0, rho01=0.0 + 0.0j, f0=math.inf, dark=True)
    f0 = gamma_pump * (gamma_deph**2 + d**2) / (gamma_deph * gg)
    p11 = 1.0 / (2.0 + f0)
    w = 2.0 * p11 - 1.0  # population inversion, negative here
    rho01 = (1j * h.g1 + h.g2) * w / (SQRT2 * (gamma_deph - 1j * d))
    return SteadyState(p11=p11, rho01=rho01, f0=f0)


def adiabatic_coherence(h: SpinHamiltonian, gamma_deph: float,
                        rho11: float, rho00: float,
                        gamma_pump: float | None = None,
                        include_doppler: bool = False) -> complex:
    """Coherence slaved to the instantaneous populations.

    Valid when the coherence decays much faster than the populations
    relax; a warning is emitted when gamma_deph < 5*gamma_pump.
    """
    if gamma_pump is not None and gamma_deph < 5.0 * gamma_pump:
        warnings.warn(
            "adiabatic coherence used outside its regime (Gamma1 < 5*Gamma)",
            stacklevel=2,
        )
    d = h.delta_plus - (h.doppler if include_doppler else 0.0)
    return (1j * h.g1 + h.g2) * (rho11 - rho00) / (SQRT2 * (gamma_deph - 1j * d))


# ---------------------------------------------------------------------------
# two-level generator in the real representation x = (rho11, Re r01, Im r01)
# ---------------------------------------------------------------------------

def generator(h: SpinHamiltonian, gamma_pump: float, gamma_deph: float,
              include_doppler: bool = True):
    """Affine generator (L, b) with xdot = L x + b, rho00 = 1 - rho11."""
    d = h.delta_plus - (h.doppler if include_doppler else 0.0)
    g1, g2 = h.g1, h.g2
    L = np.array([
        [-gamma_pump, -SQRT2 * g2, -SQRT2 * g1],
        [SQRT2 * g2, -gamma_deph, -d],
        [SQRT2 * g1, d, -gamma_deph],
    ])
    b = np.array([0.0, -g2 / SQRT2, -g1 / SQRT2])
    return L, b


def steady_state_numeric(h: SpinHamiltonian, gamma_pump: float,
                         gamma_deph: float,
                         include_doppler: bool = False) -> SteadyState:
    """Independent stationary solution: null space of the full superoperator.

    Builds the vectorized Liouvillian on the 2x2 block (unitary part plus
    dissipator), extracts its null vector and normalizes the trace.  Used
    as an oracle for :func:`steady_state_analytic`.
    """
    H = h.two_level_matrix(include_doppler=include_doppler)
    I2 = np.eye(2)
    Lsup = -1j * (np.kron(H, I2) - np.kron(I2, H.T))
    # rho vectorized row-major as (r00, r01, r10, r11)
    D = np.zeros((4, 4), dtype=complex)
    D[3, 3] = -gamma_pump
    D[0, 3] = +gamma_pump
    D[1, 1] = -gamma_deph
    D[2, 2] = -gamma_deph
    Lsup = Lsup + D
    w, v = np.linalg.eig(Lsup)
    vec = v[:, np.argmin(np.abs(w))]
    vec = vec / (vec[0] + vec[3])
    gg = h.coupling_sq
    d = h.delta_plus - (h.doppler if include_doppler else 0.0)
    f0 = math.inf if gg == 0 else gamma_pump * (gamma_deph**2 + d**2) / (gamma_deph * gg)
    return SteadyState(p11=float(np.real(vec[3])), rho01=complex(vec[1]),
                       f0=f0, dark=(gg == 0.0))


def generator_residual(x, h: SpinHamiltonian, gamma_pump, gamma_deph) -> float:
    """Scaled stationarity residual ||L x + b|| / rate_scale."""
    L, b = generator(h, gamma_pump, gamma_deph)
    scale = max(gamma_pump, gamma_deph, abs(h.delta_plus), math.sqrt(h.coupling_sq), 1.0)
    return float(np.linalg.norm(L @ x + b) / scale)


# ---------------------------------------------------------------------------
# time evolution
# ---------------------------------------------------------------------------

@dataclass
class SpinTrajectory:
    """Sampled solution of the master equation."""

    t: np.ndarray
    rho11: np.ndarray
    rho01: np.ndarray           # complex
    p_minus: np.ndarray | None = None
    rho_m0: np.ndarray | None = None   # <-1|rho|0>
    rho_m1: np.ndarray | None = None   # <-1|rho|+1>
    diagnostics: dict = field(default_factory=dict)

    @property
    def rho00(self) -> np.ndarray:
        pm = self.p_minus if self.p_minus is not None else 0.0
        return 1.0 - self.rho11 - pm

    def state_at(self, i: int) -> SpinState:
        pm = float(self.p_minus[i]) if self.p_minus is not None else 0.0
        st = SpinState.from_two_level(float(self.rho11[i]), complex(self.rho01[i]), pm)
        if self.rho_m0 is not None:
            st.rho[0, 1] = self.rho_m0[i]
            st.rho[1, 0] = np.conj(self.rho_m0[i])
            st.rho[0, 2] = self.rho_m1[i]
            st.rho[2, 0] = np.conj(self.rho_m1[i])
        return st

    @property
    def final_state(self) -> SpinState:
        return self.state_at(-1)


def _resolve_callback(h):
    if isinstance(h, SpinHamiltonian):
        return (lambda t: h), True
    return h, False


def evolve_master(state: SpinState, h, gamma_pump: float, gamma_deph: float,
                  t_span: tuple[float, float], rtol: float = 1e-9,
                  t_eval=None, three_level: bool = False,
                  method: str = "LSODA", atol: float = 1e-12) -> SpinTrajectory:
    """Integrate the dissipative spin dynamics over ``t_span``.

    ``h`` is either a static :class:`SpinHamiltonian` or a side-effect-free
    callback ``t -> SpinHamiltonian``.  The two-level mode evolves
    (rho11, rho01) with rho00 = 1 - rho11; the three-level mode keeps the
    far-detuned |-1> level with the same drive structure and a symmetric
    dissipator, and exists to bound the reduction error.
    """
    h_fn, _static = _resolve_callback(h)
    if t_eval is None:
        t_eval = np.linspace(t_span[0], t_span[1], 201)

    if not three_level:
        def rhs(t, y):
            hh = h_fn(t)
            d = hh.delta_plus - hh.doppler
            g1, g2 = hh.g1, hh.g2
            r11, u, v = y
            return (
                -SQRT2 * (g2 * u + g1 * v) - gamma_pump * r11,
                -d * v + g2 * (2.0 * r11 - 1.0) / SQRT2 - gamma_deph * u,
                d * u + g1 * (2.0 * r11 - 1.0) / SQRT2 - gamma_deph * v,
            )

        y0 = [state.p11, state.rho01.real, state.rho01.imag]
        sol = solve_ivp(rhs, t_span, y0, method=method, rtol=rtol, atol=atol,
                        t_eval=t_eval)
        if not sol.success:
            raise IntegrationError(
                f"master-equation integration failed: {sol.message}",
                last_time=float(sol.t[-1]) if sol.t.size else t_span[0],
            )
        return SpinTrajectory(
            t=sol.t,
            rho11=sol.y[0],
            rho01=sol.y[1] + 1j * sol.y[2],
            diagnostics={"nfev": sol.nfev, "method": method, "rtol": rtol},
        )

    # --- three-level validation mode ---
    def rhs3(t, y):
        hh = h_fn(t)
        H = hh.three_level_matrix()
        rho = _unpack3(y)
        drho = -1j * (H @ rho - rho @ H)
        # pumping |+1>,|-1> -> |0> at gamma_pump; all coherences decay at gamma_deph
        drho[0, 0] += -gamma_pump * rho[0, 0]
        drho[2, 2] += -gamma_pump * rho[2, 2]
        drho[1, 1] += gamma_pump * (rho[0, 0] + rho[2, 2])
        for i in range(3):
            for j in range(3):
                if i != j:
                    drho[i, j] += -gamma_deph * rho[i, j]
        return _pack3(drho)

    sol = solve_ivp(rhs3, t_span, _pack3(state.rho), method=method, rtol=rtol,
                    atol=atol, t_eval=t_eval)
    if not sol.success:
        raise IntegrationError(
            f"three-level integration failed: {sol.message}",
            last_time=float(sol.t[-1]) if sol.t.size else t_span[0],
        )
    n = sol.t.size
    rho_t = np.array([_unpack3(sol.y[:, i]) for i in range(n)])
    return SpinTrajectory(
        t=sol.t,
        rho11=np.real(rho_t[:, 2, 2]),
        rho01=rho_t[:, 1, 2],
        p_minus=np.real(rho_t[:, 0, 0]),
        rho_m0=rho_t[:, 0, 1],
        rho_m1=rho_t[:, 0, 2],
        diagnostics={"nfev": sol.nfev, "method": method, "rtol": rtol},
    )


def evolve_to_steady(state: SpinState, h: SpinHamiltonian, gamma_pump,
                     gamma_deph, rtol: float = 1e-10,
                     residual_tol: float = 1e-10,
                     max_chunks: int = 64) -> SpinState:
    """Integrate a static-Hamiltonian problem until the generator residual
    drops below ``residual_tol`` (scaled), chunk by chunk."""
    L, _ = generator(h, gamma_pump, gamma_deph)
    lam = float(np.min(-np.real(np.linalg.eigvals(L))))
    if lam <= 0:
        raise IntegrationError("generator has no decaying modes")
    chunk = 10.0 / lam
    x = np.array([state.p11, state.rho01.real, state.rho01.imag])
    t = 0.0
    for _ in range(max_chunks):
        traj = evolve_master(
            SpinState.from_two_level(x[0], x[1] + 1j * x[2]), h,
            gamma_pump, gamma_deph, (0.0, chunk), rtol=rtol,
            t_eval=np.array([0.0, chunk]), atol=1e-14,
        )
        x = np.array([traj.rho11[-1], traj.rho01[-1].real, traj.rho01[-1].imag])
        t += chunk
        if generator_residual(x, h, gamma_pump, gamma_deph) < residual_tol:
            return SpinState.from_two_level(x[0], x[1] + 1j * x[2])
    raise IntegrationError(
        f"no stationary state below residual {residual_tol} after t={t}",
        last_time=t,
    )


def _pack3(rho: np.ndarray) -> np.ndarray:
    return np.concatenate([rho.real.ravel(), rho.imag.ravel()])


def _unpack3(y: np.ndarray) -> np.ndarray:
    return y[:9].reshape(3, 3) + 1j * y[9:].reshape(3, 3)
