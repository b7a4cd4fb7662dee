"""Classical rigid-rotor dynamics of the trapped spheroid.

Three integration paths:

* :func:`integrate_deterministic` - damped libration driven by a
  position-dependent (or constant) torque/friction field, no noise.
* :func:`integrate_coupled` - co-integration of the two-level spin
  master equation with the nutation dynamics, the instantaneous torque
  expectation feeding the rotor.  No linear-response approximation; this
  is the end-to-end check of the friction model.
* :func:`langevin_ensemble` - stochastic nutation dynamics with white
  noise of intensity 2 D_p and constant friction, verifying the
  fluctuation-dissipation temperature by equipartition.

The nutation angle is evolved as a signed coordinate when the rotor has
no conserved angular momenta (planar libration through the pole); all
orientation-dependent coefficients are smooth in the signed angle, the
negative side corresponding to (|beta|, alpha+pi).  With nonzero
conserved momenta the full Euler-angle equations are integrated and the
coordinate stays in (0, pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .config import SystemConfig
from .constants import hbar, k_B
from .spin import SQRT2, IntegrationError, build_hamiltonian, steady_state_analytic
from .trap import TrapModel


@dataclass(frozen=True)
class RotorState:
    """Euler angles and rates of the spheroid."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma_euler: float = 0.0
    alpha_dot: float = 0.0
    beta_dot: float = 0.0
    gamma_dot: float = 0.0


@dataclass
class RotorTrajectory:
    t: np.ndarray
    beta: np.ndarray
    beta_dot: np.ndarray
    alpha: np.ndarray
    energy: np.ndarray
    alpha_dot: np.ndarray | None = None
    gamma_euler: np.ndarray | None = None
    untrapped: bool = False
    diagnostics: dict = field(default_factory=dict)


def constant_field(kappa_beta: float, kappa_alphabeta: float = 0.0,
                   static_torque: float = 0.0):
    """Torque field with constant coefficients (SI)."""
    def fld(alpha, beta):
        return (static_torque, kappa_alphabeta, kappa_beta)
    return fld


def response_field(cfg: SystemConfig):
    """Torque field evaluating the analytic response at each orientation."""
    from .response import response_coefficients

    def fld(alpha, beta):
        r = response_coefficients(cfg, alpha, beta)
        return (r.M_beta_0, r.kappa_alphabeta, r.kappa_beta)
    return fld


def _potential_pair(trap: TrapModel, potential: str):
    """(U(beta)-U(0), -dU/dbeta) callables for the chosen potential model."""
    if potential == "harmonic":
        k = trap.trap_stiffness_k
        return (lambda b: k * b * b, lambda b: -2.0 * k * b)
    if potential == "full":
        U0 = trap.potential(0.0)
        return (lambda b: trap.potential(b) - U0, trap.restoring_torque)
    raise ValueError("potential must be 'harmonic' or 'full'")


def integrate_deterministic(trap: TrapModel, fld, s0: RotorState,
                            t_span: tuple[float, float], rtol: float = 1e-10,
                            potential: str = "full", t_eval=None,
                            escape_bound: float = math.pi / 2,
                            method: str = "DOP853") -> RotorTrajectory:
    """Damped libration under a torque field, no fluctuations.

    ``fld(alpha, beta) -> (M0, kappa_alphabeta, kappa_beta)`` in SI.  With
    zero initial alpha_dot/gamma_dot the motion is planar and the signed
    nutation coordinate may cross zero; otherwise the full equations run
    with the two conserved momenta and the trajectory must stay clear of
    the coordinate singularity at beta = 0.
    """
    I1, I3 = trap.inertia_I1, trap.inertia_I3
    U, torque = _potential_pair(trap, potential)
    planar = (s0.alpha_dot == 0.0 and s0.gamma_dot == 0.0)
    if t_eval is None:
        t_eval = np.linspace(t_span[0], t_span[1], 2001)

    if planar:
        al0 = s0.alpha

        def rhs(t, y):
            b, bd = y
            M0, kab, kb = fld(al0, b)
            return (bd, (torque(b) + M0 - kb * bd) / I1)

        def escaped(t, y):
            return abs(y[0]) - escape_bound
        escaped.terminal = True

        sol = solve_ivp(rhs, t_span, [s0.beta, s0.beta_dot], method=method,
                        rtol=rtol, atol=1e-14, t_eval=t_eval, events=escaped)
        if not sol.success and sol.status != 1:
            raise IntegrationError(f"rotor integration failed: {sol.message}",
                                   last_time=float(sol.t[-1]) if sol.t.size else None)
        b, bd = sol.y
        E = 0.5 * I1 * bd**2 + U(b)
        return RotorTrajectory(
            t=sol.t, beta=b, beta_dot=bd, alpha=np.full_like(b, al0),
            energy=E, untrapped=(sol.status == 1),
            diagnostics={"mode": "planar", "nfev": sol.nfev},
        )

    # gyroscopic mode: p_alpha and p_gamma conserved (no alpha/gamma torques)
    sb0, cb0 = math.sin(s0.beta), math.cos(s0.beta)
    p_gamma = I3 * (s0.alpha_dot * cb0 + s0.gamma_dot)
    p_alpha = I1 * s0.alpha_dot * sb0**2 + p_gamma * cb0

    def rates(b):
        sb, cb = math.sin(b), math.cos(b)
        ad = (p_alpha - p_gamma * cb) / (I1 * sb**2)
        gd = p_gamma / I3 - ad * cb
        return ad, gd, sb, cb

    def rhs(t, y):
        al, b, ga, bd = y
        ad, gd, sb, cb = rates(b)
        M0, kab, kb = fld(al, b)
        bdd = (I1 * ad**2 * sb * cb - p_gamma * ad * sb
               + torque(b) + M0 - kab * ad - kb * bd) / I1
        return (ad, bd, gd, bdd)

    def escaped(t, y):
        return abs(y[1]) - escape_bound
    escaped.terminal = True

    sol = solve_ivp(rhs, t_span, [s0.alpha, s0.beta, s0.gamma_euler, s0.beta_dot],
                    method=method, rtol=rtol, atol=1e-14, t_eval=t_eval,
                    events=escaped)
    if not sol.success and sol.status != 1:
        raise IntegrationError(f"rotor integration failed: {sol.message}",
                               last_time=float(sol.t[-1]) if sol.t.size else None)
    al, b, ga, bd = sol.y
    ad = np.array([rates(bb)[0] for bb in b])
    gd = np.array([rates(bb)[1] for bb in b])
    E = 0.5 * I1 * (bd**2 + ad**2 * np.sin(b)**2) \
        + 0.5 * I3 * (ad * np.cos(b) + gd)**2 + U(b)
    return RotorTrajectory(
        t=sol.t, beta=b, beta_dot=bd, alpha=al, energy=E,
        alpha_dot=ad, gamma_euler=ga, untrapped=(sol.status == 1),
        diagnostics={"mode": "gyroscopic", "nfev": sol.nfev,
                     "p_alpha": p_alpha, "p_gamma": p_gamma},
    )


def spin_momentum(trap: TrapModel, s: RotorState) -> float:
    """Conserved momentum I3 (alpha_dot cos(beta) + gamma_dot)."""
    return trap.inertia_I3 * (s.alpha_dot * math.cos(s.beta) + s.gamma_dot)


def fit_energy_decay_rate(t, energy, skip_fraction: float = 0.05) -> float:
    """Exponential decay rate of an energy trace by log-linear regression."""
    t = np.asarray(t)
    E = np.asarray(energy)
    i0 = int(skip_fraction * len(t))
    mask = E[i0:] > 0
    p = np.polyfit(t[i0:][mask], np.log(E[i0:][mask]), 1)
    return -float(p[0])


# ---------------------------------------------------------------------------
# coupled spin + rotor
# ---------------------------------------------------------------------------

@dataclass
class CoupledTrajectory:
    t: np.ndarray
    rho11: np.ndarray
    rho01: np.ndarray
    beta: np.ndarray
    beta_dot: np.ndarray
    energy: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def integrate_coupled(cfg: SystemConfig, trap: TrapModel, s0: RotorState,
                      spin0, t_span: tuple[float, float], rtol: float = 1e-8,
                      potential: str = "harmonic", t_eval=None,
                      clamped: bool = False,
                      method: str = "LSODA") -> CoupledTrajectory:
    """Co-integrate the master equation and the planar nutation dynamics.

    The instantaneous two-level torque expectation (not its
    linear-response expansion) drives the rotor.  ``clamped=True`` freezes
    the angles (the infinite-inertia limit), in which case the spin
    trajectory must coincide with a fixed-angle master-equation solve.
    Requires a planar initial state (alpha_dot = gamma_dot = 0).
    """
    if s0.alpha_dot != 0.0 or s0.gamma_dot != 0.0:
        raise ValueError("coupled integration supports planar states only")
    G, G1 = cfg.pump_rate_Gamma, cfg.dephase_rate_Gamma1
    gB0, gB1 = cfg.zeeman_B0, cfg.zeeman_B1
    dw = cfg.detuning_offset
    I1 = trap.inertia_I1
    nhbar = hbar * cfg.nv_count_n
    U, torque = _potential_pair(trap, potential)
    al = s0.alpha
    ca, sa = math.cos(al), math.sin(al)
    if t_eval is None:
        t_eval = np.linspace(t_span[0], t_span[1], 2001)

    def rhs(t, y):
        r11, u, v, b, bd = y
        cb, sb = math.cos(b), math.sin(b)
        d = dw - gB0 / SQRT2 * (ca * sb + cb)
        g1 = 0.5 * gB1 * ca * cb
        g2 = 0.5 * gB1 * sa
        w2 = (2.0 * r11 - 1.0) / SQRT2
        dr11 = -SQRT2 * (g2 * u + g1 * v) - G * r11
        du = -d * v + g2 * w2 - G1 * u
        dv = d * u + g1 * w2 - G1 * v
        if clamped:
            return (dr11, du, dv, 0.0, 0.0)
        m_beta = nhbar * (gB0 / SQRT2 * (ca * cb - sb) * r11
                          - 0.5 * gB1 * ca * sb * SQRT2 * u)
        bdd = (torque(b) + m_beta) / I1
        return (dr11, du, dv, bd, bdd)

    y0 = [spin0.p11, spin0.rho01.real, spin0.rho01.imag, s0.beta, s0.beta_dot]
    sol = solve_ivp(rhs, t_span, y0, method=method, rtol=rtol,
                    atol=[1e-12, 1e-12, 1e-12, 1e-12, 1e-4],
                    t_eval=t_eval)
    if not sol.success:
        raise IntegrationError(f"coupled integration failed: {sol.message}",
                               last_time=float(sol.t[-1]) if sol.t.size else None)
    r11, u, v, b, bd = sol.y
    E = 0.5 * I1 * bd**2 + U(b)
    return CoupledTrajectory(
        t=sol.t, rho11=r11, rho01=u + 1j * v, beta=b, beta_dot=bd, energy=E,
        diagnostics={"nfev": sol.nfev, "clamped": clamped},
    )


# ---------------------------------------------------------------------------
# Langevin ensemble
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoolingReport:
    """Ensemble statistics of the stochastic nutation dynamics."""

    effective_temperature: float        # K, from <I1 beta_dot^2>
    effective_temperature_stderr: float  # K
    position_temperature: float         # K, from k <(beta-beta_eq)^2>
    position_temperature_stderr: float  # K
    predicted_T_f: float                # K, D_p/(k_B kappa_beta)
    damping_time_fit: float             # s, from a noiseless companion run
    damping_time_predicted: float       # s, I1/kappa_beta
    quantum_threshold: float            # K, hbar w0 / k_B
    occupation: float                   # k_B T_eff/(hbar w0) - 1/2
    ensemble_size: int
    seed_set: tuple
    n_steps: int
    dt: float

    def as_dict(self) -> dict:
        return {
            "effective_temperature_K": self.effective_temperature,
            "effective_temperature_stderr_K": self.effective_temperature_stderr,
            "position_temperature_K": self.position_temperature,
            "position_temperature_stderr_K": self.position_temperature_stderr,
            "predicted_T_f_K": self.predicted_T_f,
            "damping_time_fit_s": self.damping_time_fit,
            "damping_time_predicted_s": self.damping_time_predicted,
            "quantum_threshold_K": self.quantum_threshold,
            "occupation": self.occupation,
            "ensemble_size": self.ensemble_size,
            "seed_set": list(self.seed_set),
            "n_steps": self.n_steps,
            "dt_s": self.dt,
        }


def langevin_ensemble(trap: TrapModel, kappa_beta: float, D_p: float,
                      n_traj: int = 240, seed: int = 0,
                      static_torque: float = 0.0,
                      relax_times: float = 16.0,
                      burn_relax_times: float = 5.0,
                      dt_factor: float = 0.05,
                      dt: float | None = None) -> CoolingReport:
    """Stochastic nutation dynamics with constant coefficients.

    Semi-implicit Euler-Maruyama on (beta, p) with white torque noise of
    intensity 2 D_p; the step resolves both the libration frequency and
    the damping rate.  Per-trajectory RNG streams derive from
    (seed, trajectory index) so the report is reproducible bit for bit
    regardless of how the ensemble is scheduled; trajectory reduction is
    a fixed-order pairwise mean.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if D_p < 0:
        raise ValueError("negative diffusion coefficient")
    if kappa_beta <= 0:
        raise ValueError("langevin_ensemble needs kappa_beta > 0 (damped motion)")
    I1 = trap.inertia_I1
    k_spring = 2.0 * trap.trap_stiffness_k          # restoring torque -k beta
    w_osc = math.sqrt(k_spring / I1)
    gamma = kappa_beta / I1
    if dt is None:
        dt = dt_factor / max(w_osc, gamma)
    if w_osc * dt > 0.1 or gamma * dt > 0.1:
        raise ValueError(
            f"dt={dt:.3e} too coarse: needs w0*dt <= 0.1 and (kappa/I1)*dt <= 0.1"
        )
    beta_eq = static_torque / k_spring if k_spring > 0 else 0.0
    n_burn = int(burn_relax_times / gamma / dt)
    n_avg = int(relax_times / gamma / dt)
    n_steps = n_burn + n_avg

    seeds = tuple(int(s) for s in range(n_traj))
    rngs = [np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(i,)))) for i in seeds]

    beta = np.full(n_traj, beta_eq)
    p = np.zeros(n_traj)
    sig = math.sqrt(2.0 * D_p * dt)
    damp = 1.0 / (1.0 + dt * gamma)
    acc_p2 = np.zeros(n_traj)
    acc_b2 = np.zeros(n_traj)
    n_acc = 0
    block = 8192
    step = 0
    while step < n_steps:
        nb = min(block, n_steps - step)
        noise = np.empty((nb, n_traj))
        for i, rng in enumerate(rngs):
            noise[:, i] = rng.standard_normal(nb)
        for j in range(nb):
            force = -k_spring * beta + static_torque
            p = (p + dt * force + sig * noise[j]) * damp
            beta = beta + dt * p / I1
            neg = beta < 0.0
            if neg.any():                      # reflecting pole boundary
                beta[neg] = -beta[neg]
                p[neg] = -p[neg]
            if step + j >= n_burn:
                acc_p2 += p * p
                db = beta - beta_eq
                acc_b2 += db * db
                n_acc += 1
        step += nb

    T_p = acc_p2 / n_acc / (I1 * k_B)          # per-trajectory estimates
    T_b = acc_b2 / n_acc * k_spring / k_B
    T_p_mean = float(np.mean(T_p))
    T_b_mean = float(np.mean(T_b))
    T_p_err = float(np.std(T_p, ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else math.inf
    T_b_err = float(np.std(T_b, ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else math.inf

    # noiseless companion run for the decay-time fit
    b0 = max(3.0 * math.sqrt(k_B * max(T_p_mean, 1e-30) / k_spring), 1e-6)
    n_fit = min(n_steps, int(3.0 / gamma / dt))
    bf, pf = b0, 0.0
    ts_fit = np.arange(n_fit) * dt
    E_fit = np.empty(n_fit)
    for j in range(n_fit):
        E_fit[j] = 0.5 * pf * pf / I1 + 0.5 * k_spring * bf * bf
        force = -k_spring * bf
        pf = (pf + dt * force) * damp
        bf = bf + dt * pf / I1
    rate = fit_energy_decay_rate(ts_fit, E_fit, skip_fraction=0.0)

    T_eff = T_p_mean
    w0 = trap.libration_freq_omega0
    return CoolingReport(
        effective_temperature=T_eff,
        effective_temperature_stderr=T_p_err,
        position_temperature=T_b_mean,
        position_temperature_stderr=T_b_err,
        predicted_T_f=D_p / (k_B * kappa_beta),
        damping_time_fit=1.0 / rate,
        damping_time_predicted=I1 / kappa_beta,
        quantum_threshold=hbar * w0 / k_B if w0 > 0 else math.inf,
        occupation=(k_B * T_eff / (hbar * w0) - 0.5) if w0 > 0 else math.inf,
        ensemble_size=n_traj,
        seed_set=(seed,) + seeds,
        n_steps=n_steps,
        dt=dt,
    )
