"""Torque on the rotor and its linear response to slow rotation.

Two analytic routes are provided for the friction coefficients, plus a
brute-force finite-velocity oracle:

* ``kappa_*`` (primary): exact first-order response of the stationary
  two-level state, obtained from the generator resolvent.  No adiabatic
  elimination, valid at any saturation.
* ``kappa_*_closed_form``: the compact saturation-formula expressions
  (adiabatic elimination of the coherence, keeping only the detuning
  variation of the saturation parameter).  They track the exact values
  to a few percent at strong saturation but are kept separate so the
  deviation can be measured rather than hidden.
* :func:`friction_velocity_sweep`: integrates the actual master equation
  with slowly moving angles and regresses the torque against velocity.
  This is the ground truth the analytic routes are validated against.

Torque components and diffusion follow the same two-level reduction;
all public outputs are SI (N m, J s, J^2 s, K) and scale linearly with
the number of independent spins ``nv_count_n`` (the predicted
temperature is n-independent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp

from .config import SystemConfig
from .constants import hbar, h_planck, k_B
from .spin import (SQRT2, SpinHamiltonian, SpinState, build_hamiltonian,
                   generator, steady_state_analytic)


class NonlinearResponseError(RuntimeError):
    """Velocity sweep left the linear regime; retry with smaller velocities."""


# ---------------------------------------------------------------------------
# torque
# ---------------------------------------------------------------------------

def torque_expectation(h: SpinHamiltonian, state: SpinState,
                       cfg: SystemConfig) -> tuple[float, float]:
    """Mean torque components (M_alpha, M_beta) in N m.

    M_beta carries the dominant static-field term plus the drive-field
    correction; M_alpha keeps only the drive-field terms (the form used
    throughout the cooling analysis, where it is negligible against
    M_beta for B1 << B0).  Expectations are taken in the {|0>,|+1>}
    block.
    """
    gB0, gB1 = cfg.zeeman_B0, cfg.zeeman_B1
    al, be = h.alpha, h.beta
    sx = SQRT2 * state.rho01.real   # <Sx> in the two-level block
    sy = SQRT2 * state.rho01.imag   # <Sy>
    sz = state.p11                  # <Sz>
    m_alpha = -0.5 * gB1 * math.sin(al) * math.cos(be) * sx \
        - 0.5 * gB1 * math.cos(al) * sy
    m_beta = gB0 / SQRT2 * (math.cos(al) * math.cos(be) - math.sin(be)) * sz \
        - 0.5 * gB1 * math.cos(al) * math.sin(be) * sx
    n = cfg.nv_count_n
    return (hbar * n * m_alpha, hbar * n * m_beta)


def _geometry(cfg, alpha, beta):
    """Torque gradient row vector and angle derivatives of (d+, g1, g2)."""
    gB0, gB1 = cfg.zeeman_B0, cfg.zeeman_B1
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    c = ca * cb - sb
    # M_beta = Mrow . x  with x = (rho11, Re r01, Im r01), in rad/s units
    Mrow = np.array([gB0 / SQRT2 * c, -0.5 * gB1 * ca * sb * SQRT2, 0.0])
    dd_dbeta = -gB0 / SQRT2 * c
    dd_dalpha = gB0 / SQRT2 * sa * sb
    dg1_dbeta = -0.5 * gB1 * ca * sb
    dg1_dalpha = -0.5 * gB1 * sa * cb
    dg2_dbeta = 0.0
    dg2_dalpha = 0.5 * gB1 * ca
    return Mrow, (dd_dalpha, dg1_dalpha, dg2_dalpha), (dd_dbeta, dg1_dbeta, dg2_dbeta)


def _generator_derivative(dd, dg1, dg2):
    dL = np.array([
        [0.0, -SQRT2 * dg2, -SQRT2 * dg1],
        [SQRT2 * dg2, 0.0, -dd],
        [SQRT2 * dg1, dd, 0.0],
    ])
    db = np.array([0.0, -dg2 / SQRT2, -dg1 / SQRT2])
    return dL, db


def _steady_and_derivatives(cfg, alpha, beta):
    h = build_hamiltonian(cfg, alpha, beta)
    L, b = generator(h, cfg.pump_rate_Gamma, cfg.dephase_rate_Gamma1)
    xs = np.linalg.solve(L, -b)
    Mrow, dA, dB = _geometry(cfg, alpha, beta)
    dLa, dba = _generator_derivative(*dA)
    dLb, dbb = _generator_derivative(*dB)
    dxs_da = -np.linalg.solve(L, dLa @ xs + dba)
    dxs_db = -np.linalg.solve(L, dLb @ xs + dbb)
    return h, L, xs, Mrow, dxs_da, dxs_db


@dataclass(frozen=True)
class ResponseCoefficients:
    """Static torque, friction, diffusion and predicted temperature at one
    orientation (SI units, scaled by the spin count).

    ``kappa_beta``/``kappa_alphabeta`` are the exact linear-response
    values; the ``*_closed_form`` companions are the compact
    saturation-formula variants.  ``T_f`` is the fluctuation-dissipation
    ratio D_p/(k_B kappa_beta); ``T_f_simplified`` is the closed-form
    temperature expression (1+f0) (g1^2+g2^2) Gamma1/(delta+ Gamma) in
    temperature units, which exceeds the ratio of the closed-form
    coefficients by exactly 2.
    """

    M_beta_0: float              # N m
    kappa_alphabeta: float       # J s
    kappa_beta: float            # J s
    kappa_alphabeta_closed_form: float  # J s
    kappa_beta_closed_form: float       # J s
    D_p: float                   # J^2 s
    T_f: float                   # K
    T_f_simplified: float        # K
    p_s: float
    f0: float
    A1: float                    # d(relaxation rate)/d(alpha_dot), dimensionless
    correlation_rate: float      # rad/s
    G0: float
    delta_plus: float            # rad/s
    coupling_sq: float           # (rad/s)^2
    region_tag: str

    @property
    def kappa_beta_h(self) -> float:
        """Friction on the nutation angle in units of the Planck constant."""
        return self.kappa_beta / h_planck

    @property
    def kappa_alphabeta_h(self) -> float:
        return self.kappa_alphabeta / h_planck


def response_coefficients(cfg: SystemConfig, alpha: float,
                          beta: float) -> ResponseCoefficients:
    """Full analytic response at one orientation (the workhorse)."""
    G, G1 = cfg.pump_rate_Gamma, cfg.dephase_rate_Gamma1
    h, L, xs, Mrow, dxs_da, dxs_db = _steady_and_derivatives(cfg, alpha, beta)
    n = cfg.nv_count_n

    # exact response: x(t) ~ xs + L^-1 (dxs/dtheta) thetadot, plus the
    # rotational-Doppler dependence of the generator for the alpha channel
    x1_beta = np.linalg.solve(L, dxs_db)
    dL_dad = np.zeros((3, 3))
    cb = math.cos(beta)
    dL_dad[1, 2] = cb
    dL_dad[2, 1] = -cb
    x1_alpha = np.linalg.solve(L, dxs_da - dL_dad @ xs)
    kb_exact = -float(Mrow @ x1_beta)
    kab_exact = -float(Mrow @ x1_alpha)

    st = steady_state_analytic(h, G, G1)
    f0, p_s = st.f0, st.p11
    gg = h.coupling_sq
    dp = h.delta_plus
    c = math.cos(alpha) * math.cos(beta) - math.sin(beta)
    if st.dark:
        kb_cf = kab_cf = 0.0
        A1 = 0.0
        lam0 = G
        G0 = 0.0
        Dp_t = 0.0
    else:
        kb_cf = (cfg.zeeman_B0 * c) ** 2 * dp * f0 / (G1 * gg * (2 + f0) ** 3)
        kab_cf = -(cfg.zeeman_B0 ** 2) * dp * f0 * math.sin(alpha) * math.sin(beta) * c \
            / (G1 * gg * (2 + f0) ** 3)
        A1 = 4.0 * G**2 * dp * cb / (G1 * gg * f0**2)
        lam0 = (2.0 + f0) * G / f0
        G0 = p_s - p_s**2
        Dp_t = 0.5 * (cfg.zeeman_B0 * c) ** 2 * G0 / lam0

    kappa_beta = hbar * n * kb_exact
    D_p = hbar**2 * n * Dp_t
    T_f = D_p / (k_B * kappa_beta) if kappa_beta != 0 else math.inf
    T_f_simpl = (math.inf if (st.dark or dp == 0) else
                 hbar * (1.0 + f0) * gg * G1 / (dp * G) / k_B)
    if cfg.no_cooling:
        tag = "no_cooling_config"
    elif dp > 0:
        tag = "cooling"
    else:
        tag = "anti_damping"
    return ResponseCoefficients(
        M_beta_0=hbar * n * float(Mrow @ xs),
        kappa_alphabeta=hbar * n * kab_exact,
        kappa_beta=kappa_beta,
        kappa_alphabeta_closed_form=hbar * n * kab_cf,
        kappa_beta_closed_form=hbar * n * kb_cf,
        D_p=D_p,
        T_f=T_f,
        T_f_simplified=T_f_simpl,
        p_s=p_s,
        f0=f0,
        A1=A1,
        correlation_rate=lam0,
        G0=G0,
        delta_plus=dp,
        coupling_sq=gg,
        region_tag=tag,
    )


def kappa_beta_at_frequency(cfg: SystemConfig, alpha: float, beta: float,
                            omega: float) -> complex:
    """Friction at finite drive frequency: response to beta_dot = v e^{i w t}.

    The real part is the dissipative coefficient governing the energy
    decay of a libration at ``omega``; it reduces to ``kappa_beta`` as
    omega -> 0 and rolls off once omega exceeds the spin relaxation
    rate.  Returned in J s (complex).
    """
    _, L, xs, Mrow, _, dxs_db = _steady_and_derivatives(cfg, alpha, beta)
    resp = np.linalg.solve(1j * omega * np.eye(3) - L, dxs_db)
    return hbar * cfg.nv_count_n * complex(Mrow @ resp)


# ---------------------------------------------------------------------------
# finite-velocity oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrictionSweepResult:
    kappa: float               # J s
    static_torque: float       # N m, regression intercept
    quadratic_fraction: float  # |quadratic term| / |linear term| at v_max
    velocities: tuple          # rad/s
    settle_time: float         # s


def _integrate_moving(cfg, alpha0, beta0, adot, bdot, T, rtol):
    """Integrate the two-level master equation while the angles move
    linearly, starting from the steady state of the initial angles.
    Scalar arithmetic keeps the right-hand side cheap."""
    G, G1 = cfg.pump_rate_Gamma, cfg.dephase_rate_Gamma1
    gB0, gB1 = cfg.zeeman_B0, cfg.zeeman_B1
    dw = cfg.detuning_offset

    def rhs(t, y):
        al = alpha0 + adot * t
        be = beta0 + bdot * t
        ca, sa = math.cos(al), math.sin(al)
        cb, sb = math.cos(be), math.sin(be)
        d = dw - gB0 / SQRT2 * (ca * sb + cb) - adot * cb
        g1 = 0.5 * gB1 * ca * cb
        g2 = 0.5 * gB1 * sa
        r11, u, v = y
        w2 = (2.0 * r11 - 1.0) / SQRT2
        return (
            -SQRT2 * (g2 * u + g1 * v) - G * r11,
            -d * v + g2 * w2 - G1 * u,
            d * u + g1 * w2 - G1 * v,
        )

    h0 = build_hamiltonian(cfg, alpha0, beta0, alpha_dot=adot)
    st = steady_state_analytic(h0, G, G1, include_doppler=True)
    y0 = [st.p11, st.rho01.real, st.rho01.imag]
    sol = solve_ivp(rhs, (0.0, T), y0, method="LSODA", rtol=rtol, atol=1e-14)
    return sol.y[:, -1]


def friction_velocity_sweep(cfg: SystemConfig, alpha: float, beta: float,
                            channel: str = "beta", velocities=None,
                            settle: float = 25.0, rtol: float = 1e-11,
                            nonlinearity_limit: float = 0.05) -> FrictionSweepResult:
    """Measure the velocity-proportional torque by brute force.

    For each velocity the master equation is integrated with the angles
    moving linearly so that they arrive at (alpha, beta) after ``settle``
    relaxation times; the torque at arrival is regressed against the
    velocity (quadratic model, sign-symmetric velocity set).  Raises
    :class:`NonlinearResponseError` when the quadratic term exceeds
    ``nonlinearity_limit`` of the linear one at the largest velocity.
    """
    if channel not in ("alpha", "beta"):
        raise ValueError("channel must be 'alpha' or 'beta'")
    h = build_hamiltonian(cfg, alpha, beta)
    L, _ = generator(h, cfg.pump_rate_Gamma, cfg.dephase_rate_Gamma1)
    lam_min = float(np.min(-np.real(np.linalg.eigvals(L))))
    T = settle / lam_min
    if velocities is None:
        v0 = 0.02 * lam_min
        velocities = np.array([-1.0, -0.5, 0.5, 1.0]) * v0
    velocities = np.asarray(velocities, dtype=float)
    Mrow, _, _ = _geometry(cfg, alpha, beta)
    torques = []
    for v in velocities:
        if channel == "beta":
            x = _integrate_moving(cfg, alpha, beta - v * T, 0.0, v, T, rtol)
        else:
            x = _integrate_moving(cfg, alpha - v * T, beta, v, 0.0, T, rtol)
        torques.append(float(Mrow @ x))
    A = np.vstack([np.ones_like(velocities), velocities, velocities**2]).T
    coef, *_ = np.linalg.lstsq(A, np.array(torques), rcond=None)
    vmax = float(np.max(np.abs(velocities)))
    lin = abs(coef[1]) * vmax
    quad_term = abs(coef[2]) * vmax**2
    frac = quad_term / lin if lin > 0 else math.inf
    if frac > nonlinearity_limit:
        raise NonlinearResponseError(
            f"quadratic term is {frac:.1%} of the linear one; "
            "retry with smaller velocities"
        )
    n = cfg.nv_count_n
    return FrictionSweepResult(
        kappa=-hbar * n * float(coef[1]),
        static_torque=hbar * n * float(coef[0]),
        quadratic_fraction=frac,
        velocities=tuple(velocities),
        settle_time=T,
    )


# ---------------------------------------------------------------------------
# torque-fluctuation correlation and diffusion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationResult:
    t: np.ndarray           # s
    G: np.ndarray           # population correlation samples (analytic form)
    G_numeric: np.ndarray   # regression-theorem samples from the generator
    D_p: float              # J^2 s, closed form
    correlation_rate: float  # rad/s
    G0: float


def correlation_and_diffusion(cfg: SystemConfig, alpha: float, beta: float,
                              n_samples: int = 400,
                              t_max_rate: float = 12.0) -> CorrelationResult:
    """Population correlation function G(t) and momentum diffusion D_p.

    ``G`` is the single-exponential form G0 exp(-lam0 t) implied by the
    rate-equation reduction; ``G_numeric`` applies the regression theorem
    to the full two-level generator and is the oracle for the decay law
    (they differ at the few-percent level through the finite coherence
    lifetime).
    """
    G, G1 = cfg.pump_rate_Gamma, cfg.dephase_rate_Gamma1
    h = build_hamiltonian(cfg, alpha, beta)
    st = steady_state_analytic(h, G, G1)
    if st.dark:
        raise ValueError("dark configuration: no steady fluctuations to correlate")
    lam0 = (2.0 + st.f0) * G / st.f0
    G0 = st.p11 - st.p11**2
    ts = np.linspace(0.0, t_max_rate / lam0, n_samples)
    G_analytic = G0 * np.exp(-lam0 * ts)

    # regression theorem on the vectorized generator
    H = h.two_level_matrix()
    I2 = np.eye(2)
    Lsup = -1j * (np.kron(H, I2) - np.kron(I2, H.T))
    D = np.zeros((4, 4), dtype=complex)
    D[3, 3] = -G
    D[0, 3] = +G
    D[1, 1] = -G1
    D[2, 2] = -G1
    Lsup = Lsup + D
    w, V = np.linalg.eig(Lsup)
    rs = V[:, np.argmin(np.abs(w))]
    rs = rs / (rs[0] + rs[3])
    ps = float(np.real(rs[3]))
    y0 = np.array([0.0, 0.0, rs[2], rs[3]], dtype=complex)  # vec(P1 rho_s)
    coef = np.linalg.solve(V, y0)
    G_num = np.real((V[3, :] * coef) @ np.exp(np.outer(w, ts))) - ps**2

    c = math.cos(alpha) * math.cos(beta) - math.sin(beta)
    Dp = 0.5 * (cfg.zeeman_B0 * c) ** 2 * G0 / lam0 * hbar**2 * cfg.nv_count_n
    return CorrelationResult(t=ts, G=G_analytic, G_numeric=G_num, D_p=Dp,
                             correlation_rate=lam0, G0=G0)


def diffusion_from_quadrature(cfg: SystemConfig, alpha: float,
                              beta: float) -> float:
    """D_p = (1/2) Integral_-inf^inf <M' M'> dt by adaptive quadrature of the
    sampled correlation law (oracle for the closed form)."""
    G, G1 = cfg.pump_rate_Gamma, cfg.dephase_rate_Gamma1
    h = build_hamiltonian(cfg, alpha, beta)
    st = steady_state_analytic(h, G, G1)
    lam0 = (2.0 + st.f0) * G / st.f0
    G0 = st.p11 - st.p11**2
    c = math.cos(alpha) * math.cos(beta) - math.sin(beta)
    pref = 0.5 * (cfg.zeeman_B0 * c) ** 2

    def corr(t):
        return pref * G0 * math.exp(-lam0 * t)

    # even in t: half-integral doubled, then the leading 1/2
    val, _err = quad(corr, 0.0, np.inf)
    return 0.5 * 2.0 * val * hbar**2 * cfg.nv_count_n


# ---------------------------------------------------------------------------
# fluctuation-dissipation temperatures
# ---------------------------------------------------------------------------

def fdt_temperature(delta_plus: float, coupling_sq: float, gamma_pump: float,
                    gamma_deph: float) -> float:
    """Closed-form stationary temperature (K) of the nutation mode,

        k_B T = hbar (1 + f0) (g1^2+g2^2) Gamma1 / (delta+ Gamma).

    Monotone in the saturation parameter; see
    :func:`fdt_temperature_high_saturation` for the large-f0 shortcut.
    """
    if delta_plus <= 0:
        return math.inf
    f0 = gamma_pump * (gamma_deph**2 + delta_plus**2) / (gamma_deph * coupling_sq)
    return hbar * (1.0 + f0) * coupling_sq * gamma_deph / (delta_plus * gamma_pump) / k_B


def fdt_temperature_high_saturation(delta_plus: float,
                                    gamma_deph: float) -> float:
    """Large-f0 limit: k_B T = hbar (Gamma1^2 + delta+^2)/delta+.

    Minimized at delta+ = Gamma1 where k_B T = 2 hbar Gamma1.
    """
    if delta_plus <= 0:
        return math.inf
    return hbar * (gamma_deph**2 + delta_plus**2) / delta_plus / k_B


# ---------------------------------------------------------------------------
# zero net alpha-impulse
# ---------------------------------------------------------------------------

def alpha_torque_impulse(cfg: SystemConfig, beta: float,
                         epsabs: float = 1e-60) -> tuple[float, float]:
    """Integral of the cross-friction coefficient over one alpha revolution.

    Evaluates the closed-form odd-in-alpha expression whose revolution
    average vanishes identically; returns (integral, max |kappa|) in SI
    so callers can form the dimensionless ratio.
    """
    def kab(al):
        return response_coefficients(cfg, al, beta).kappa_alphabeta_closed_form

    val, _err = quad(kab, 0.0, 2.0 * math.pi, limit=200, epsabs=epsabs)
    grid = np.linspace(0.0, 2.0 * math.pi, 721)
    max_abs = max(abs(kab(al)) for al in grid)
    return val, max_abs


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = (
    "alpha_deg", "beta_deg", "delta_plus_rad_per_s", "f0", "p_s",
    "kappa_beta_h", "kappa_alphabeta_h", "D_p_J2s", "T_f_K", "region_tag",
)


def response_sweep(cfg: SystemConfig, alphas, betas) -> list[dict]:
    """Grid evaluation producing one row per (alpha, beta), SI + h units."""
    rows = []
    for al in np.atleast_1d(alphas):
        for be in np.atleast_1d(betas):
            r = response_coefficients(cfg, float(al), float(be))
            rows.append({
                "alpha_deg": math.degrees(al),
                "beta_deg": math.degrees(be),
                "delta_plus_rad_per_s": r.delta_plus,
                "f0": r.f0,
                "p_s": r.p_s,
                "kappa_beta_h": r.kappa_beta_h,
                "kappa_alphabeta_h": r.kappa_alphabeta_h,
                "D_p_J2s": r.D_p,
                "T_f_K": r.T_f,
                "region_tag": r.region_tag,
            })
    return rows
