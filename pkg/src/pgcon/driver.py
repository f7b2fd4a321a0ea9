"""Outer solver loop: step decomposition, merit-based acceptance,
termination taxonomy, per-iteration ledger, and identification trackers.

Status taxonomy
---------------
KktPoint              all three KKT tolerances met
InfeasibleStationary  stationary for the violation but c != 0 (certified)
MaxIter / TimeLimit   budget exhausted
Stalled               proximal parameter collapsed below its floor, the step
                      vanished repeatedly without passing the KKT test, or a
                      subproblem failed on degenerate data
MeritCollapse         merit weight driven below its floor
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import globalization as glob
from .geometry import active_set, project_box
from .normal_step import compute_normal_step
from .problem import BoxSet, ProblemInstance, apply_scaling
from .tangential import TangentialError, solve_tangential

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "SolveReport",
    "KktParts",
    "solve",
    "kkt_residual",
    "identification_trackers",
    "ledger_to_csv",
    "report_to_json",
]

_UNIT_INTERVAL_FIELDS = ("sigma_c", "eps_tau", "xi", "gamma", "eta_phi", "eta_m")
_POSITIVE_FIELDS = ("alpha0", "tau_init", "kappa_v", "kappa_v_inf", "tol_c",
                    "tol_stat", "tol_comp", "tol_step", "time_limit", "alpha_cap",
                    "qp_tol", "tol_infeas_c")


@dataclass
class SolverConfig:
    """All tunable parameters; defaults follow the reference tuning."""

    x0: Optional[np.ndarray] = None
    alpha0: float = 10.0
    tau_init: float = 1.0
    kappa_v: float = 1e3
    kappa_v_inf: float = 1e-2
    sigma_c: float = 0.1
    eps_tau: float = 0.1
    xi: float = 0.5
    gamma: float = 0.5
    eta_phi: float = 1e-4
    eta_m: float = 1e-4
    tol_c: float = 1e-6
    tol_stat: float = 1e-4
    tol_comp: float = 1e-4
    tol_step: float = 1e-12
    tol_infeas_c: float = 1e-6
    max_iter: int = 10000
    time_limit: float = 3600.0
    alpha_rule: str = "min_cap"
    alpha_cap: float = 10.0
    qp_tol: float = 1e-10
    max_backtracks: int = 60
    scaling: bool = True
    check_invariants: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in _UNIT_INTERVAL_FIELDS:
            val = getattr(self, name)
            if not (0.0 < val < 1.0):
                raise ValueError(f"{name}={val!r} must lie strictly inside (0, 1)")
        for name in _POSITIVE_FIELDS:
            val = getattr(self, name)
            if not val > 0:
                raise ValueError(f"{name}={val!r} must be positive")
        if self.alpha_rule not in glob.ALPHA_RULES:
            raise ValueError(f"alpha_rule must be one of {glob.ALPHA_RULES}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.x0 is not None:
            self.x0 = np.asarray(self.x0, dtype=float)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if out["x0"] is not None:
            out["x0"] = np.asarray(out["x0"]).tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass
class KktParts:
    stationarity: float
    feasibility: float
    complementarity: float

    @property
    def chi(self) -> float:
        return max(self.stationarity, self.feasibility, self.complementarity)


def _complementarity_vector(x, z, box: BoxSet) -> np.ndarray:
    """Componentwise complementarity residual, box-generalized.

    On the nonnegative orthant this reduces to |min(x_i, -z_i)|; a dual
    pointing at an infinite bound is a pure sign violation of size |z_i|.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    out = np.zeros(x.shape[0])
    fixed = box.lower == box.upper
    for i in range(x.shape[0]):
        if fixed[i] or z[i] == 0.0:
            continue
        if z[i] < 0:
            out[i] = min(x[i] - box.lower[i], -z[i]) if np.isfinite(box.lower[i]) else -z[i]
        else:
            out[i] = min(box.upper[i] - x[i], z[i]) if np.isfinite(box.upper[i]) else z[i]
    return out


def _kkt_parts(g, c_val, J, box: BoxSet, x, y, z, g_r) -> KktParts:
    stat = float(np.linalg.norm(g + g_r + J.T @ y + z))
    feas = float(np.linalg.norm(c_val))
    comp = float(np.linalg.norm(_complementarity_vector(x, z, box)))
    return KktParts(stationarity=stat, feasibility=feas, complementarity=comp)


def kkt_residual(p: ProblemInstance, x, y, z, g_r):
    """(chi, parts) at x for the supplied multiplier estimates."""
    x = np.asarray(x, dtype=float)
    parts = _kkt_parts(p.g(x), p.c(x), p.J(x), p.box, x, y, z, g_r)
    return parts.chi, parts


@dataclass
class IterationRecord:
    k: int
    x_hash: str
    delta: float
    beta: float
    norm_v: float
    norm_u: float
    norm_s: float
    tau: float
    alpha: float
    merit_before: float
    merit_after: float
    accepted: bool
    chi: float
    chi_stat: float
    chi_comp: float
    chi_bar: float
    c_norm: float
    f_val: float
    r_val: float
    active_lower: tuple
    active_upper: tuple
    sign_pattern: str
    wall_time: float


@dataclass
class SolveReport:
    status: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    g_r: np.ndarray
    chi: float
    c_norm: float
    iterations: int
    records: list
    objective: float  # unscaled f + r at the final point
    f_unscaled: float
    wall_time: float
    invariant_violations: list = field(default_factory=list)
    config_hash: str = ""

    @property
    def success(self) -> bool:
        return self.status == "KktPoint"


def _hash_point(x) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype=float).tobytes()).hexdigest()[:16]


def _sign_pattern(x, reg_weights, zero_tol=1e-12) -> str:
    idx = np.flatnonzero(reg_weights > 0)
    out = []
    for i in idx:
        if x[i] > zero_tol:
            out.append("+")
        elif x[i] < -zero_tol:
            out.append("-")
        else:
            out.append("0")
    return "".join(out)


class _InvariantMonitor:
    """Collects violations of the runtime-checkable step inequalities.

    Each check is a direct transcription of a property the step
    computation is supposed to guarantee; slack 1e-10 absorbs rounding.
    """

    SLACK = 1e-10

    def __init__(self, cfg: SolverConfig, orthant: bool):
        self.cfg = cfg
        self.orthant = orthant
        self.kappa1 = cfg.gamma * cfg.eta_m * (1.0 - cfg.eta_m)
        self.violations = []
        self.prev_tau = None

    def _add(self, k, name, margin):
        self.violations.append({"k": k, "check": name, "margin": float(margin)})

    def check_iteration(self, k, *, normal, tang, x, c_val, J, alpha, tau, s,
                        tkkt_overall, subgrad_margin, A_k, cJs_norm):
        cfg = self.cfg
        c_norm = float(np.linalg.norm(c_val))
        if self.prev_tau is not None and tau < self.prev_tau:
            # the update's defining inequality after any decrease
            gain = c_norm - cJs_norm
            if tau * A_k > (1.0 - cfg.sigma_c) * gain + self.SLACK:
                self._add(k, "tau_update_inequality",
                          tau * A_k - (1.0 - cfg.sigma_c) * gain)
        s_norm = float(np.linalg.norm(s))
        if s_norm / alpha <= cfg.tol_step:
            # a vanishing trial step must come from vanishing parts
            cap = max(10.0 * cfg.tol_step * alpha,
                      1e-8 * (1.0 + float(np.max(np.abs(x), initial=0.0))))
            if np.linalg.norm(normal.v) > cap or np.linalg.norm(tang.u) > cap:
                self._add(k, "step_parts_vanish", max(
                    np.linalg.norm(normal.v), np.linalg.norm(tang.u)))
        if normal.delta > 0 and normal.beta > 0:
            jtj_norm = float(scipy.linalg.svdvals(J)[0] ** 2) if J.size else 0.0
            ratio = float(np.linalg.norm(normal.v_cauchy)) / normal.beta
            rhs = self.kappa1 * ratio * min(ratio / (1.0 + jtj_norm),
                                            cfg.kappa_v * alpha * normal.delta)
            lhs = normal.m0 - 0.5 * float(
                np.dot(c_val + J @ normal.v_cauchy, c_val + J @ normal.v_cauchy))
            if lhs < rhs - self.SLACK:
                self._add(k, "cauchy_decrease", rhs - lhs)
            if c_norm > 0:
                v1n = float(np.linalg.norm(normal.v_unit))
                rhs2 = (self.kappa1 / c_norm) * v1n ** 2 * min(
                    1.0 / (1.0 + jtj_norm), cfg.kappa_v * alpha)
                if normal.lin_feas_gain < rhs2 - self.SLACK:
                    self._add(k, "linearized_gain", rhs2 - normal.lin_feas_gain)
        if self.orthant:
            lhs = float(np.linalg.norm(s))
            rhs = float(np.linalg.norm(np.minimum(x, -tang.z)))
            if lhs < rhs - self.SLACK:
                self._add(k, "step_bounds_complementarity", rhs - lhs)
        if tkkt_overall > 1e-8:
            self._add(k, "tangential_kkt", tkkt_overall)
        if subgrad_margin > 1e-8:
            self._add(k, "subgradient_membership", subgrad_margin)
        if np.any(tang.p * tang.q != 0.0):
            self._add(k, "split_overlap", float(np.max(tang.p * tang.q)))
        if self.prev_tau is not None and tau > self.prev_tau + 1e-15:
            self._add(k, "tau_monotone", tau - self.prev_tau)
        self.prev_tau = tau

    def check_shifted_merit(self, records):
        """Monotone surrogate of the shifted merit, only meaningful when the
        proximal parameter is held on acceptance."""
        if self.cfg.alpha_rule != "hold" or not records:
            return
        f_lb = min(r.f_val for r in records) - 1.0
        prev = None
        for r in records:
            val = r.tau * (r.f_val + r.r_val - f_lb) + r.c_norm
            if prev is not None and val > prev + 1e-9 * (1.0 + abs(prev)):
                self._add(r.k, "shifted_merit_monotone", val - prev)
            prev = val


def solve(p: ProblemInstance, cfg: SolverConfig) -> SolveReport:
    """Run the full method on one problem instance."""
    t_start = time.perf_counter()

    if cfg.x0 is not None:
        x_init = np.asarray(cfg.x0, dtype=float)
    elif p.x0 is not None:
        x_init = p.x0
    else:
        x_init = np.zeros(p.n)
    x = project_box(x_init, p.box)
    if not np.array_equal(x, np.asarray(x_init, dtype=float)):
        warnings.warn(f"{p.name}: starting point projected into the box")

    scale_info = None
    work = p
    if cfg.scaling:
        work, scale_info = apply_scaling(p, x)

    box = work.box
    merit = glob.MeritState(tau=cfg.tau_init, alpha=cfg.alpha0)
    f_val = work.f(x)
    g_val = work.g(x)
    c_val = work.c(x)
    J_val = work.J(x)
    r_val = work.reg.value(x)

    monitor = _InvariantMonitor(cfg, box.is_orthant()) if cfg.check_invariants else None
    records: list[IterationRecord] = []
    warm = None
    prev_active = None
    isp_streak = 0
    isp_last_alpha = np.inf
    stall_streak = 0
    y = np.zeros(p.m)
    z = np.zeros(p.n)
    g_r = np.zeros(p.n)

    def finish(status_, iters):
        c_unscaled = (scale_info.unscale_constraints(c_val) if scale_info is not None else c_val)
        f_un = (scale_info.unscale_objective(f_val) if scale_info is not None else f_val)
        r_un = (scale_info.unscale_objective(r_val) if scale_info is not None else r_val)
        chi_fin = records[-1].chi if records else np.inf
        report = SolveReport(
            status=status_, x=x.copy(), y=y.copy(), z=z.copy(), g_r=g_r.copy(),
            chi=chi_fin, c_norm=float(np.linalg.norm(c_unscaled)),
            iterations=iters, records=records, objective=f_un + r_un,
            f_unscaled=f_un, wall_time=time.perf_counter() - t_start,
            config_hash=cfg.config_hash(),
        )
        if monitor is not None:
            monitor.check_shifted_merit(records)
            report.invariant_violations = monitor.violations
        return report

    for k in range(cfg.max_iter):
        if time.perf_counter() - t_start > cfg.time_limit:
            return finish("TimeLimit", k)
        t_iter = time.perf_counter()

        alpha = merit.alpha
        normal = compute_normal_step(
            x, c_val, J_val, alpha, box,
            kappa_v=cfg.kappa_v, kappa_v_inf=cfg.kappa_v_inf, gamma=cfg.gamma,
            eta_m=cfg.eta_m, tol_infeas_c=cfg.tol_infeas_c,
            max_backtracks=cfg.max_backtracks, qp_tol=cfg.qp_tol,
        )
        if normal.infeasible_stationary:
            if isp_streak and alpha <= isp_last_alpha * (1 + 1e-12):
                isp_streak += 1
            else:
                isp_streak = 1
            isp_last_alpha = alpha
            if isp_streak >= 3:
                return finish("InfeasibleStationary", k)
        else:
            isp_streak = 0

        cur_active = active_set(x + normal.v, box)
        try:
            tang, raw_primal = solve_tangential(
                x, normal.v, g_val, J_val, alpha, work.reg, box,
                warm=(warm if prev_active == cur_active else None),
                qp_tol=cfg.qp_tol,
            )
        except TangentialError as exc:
            # subproblem failure (degenerate or numerically rank-deficient
            # data): record what we have instead of propagating
            warnings.warn(f"{p.name}: tangential subproblem failed at "
                          f"iteration {k}: {exc}")
            return finish("Stalled", k)
        warm, prev_active = raw_primal, cur_active
        y, z, g_r = tang.y, tang.z, tang.g_r
        w = tang.w
        s = w - x

        parts = _kkt_parts(g_val, c_val, J_val, box, x, y, z, g_r)
        chi = parts.chi
        comp_v1 = max(parts.stationarity, float(np.linalg.norm(normal.v_unit)),
                      parts.complementarity)

        s_norm = float(np.linalg.norm(s))
        A_k = glob.compute_Ak(g_val, s, alpha, work.reg.value(w), r_val)
        c_norm = float(np.linalg.norm(c_val))
        cJs_norm = float(np.linalg.norm(c_val + J_val @ s))
        tau_tr = glob.tau_trial(A_k, c_norm, cJs_norm, cfg.sigma_c)
        tau_new = glob.update_tau(merit.tau, tau_tr, cfg.eps_tau)

        f_w = work.f(w)
        r_w = work.reg.value(w)
        c_w = work.c(w)
        phi_old = glob.merit_from_parts(f_val, r_val, c_norm, tau_new)
        phi_new = glob.merit_from_parts(f_w, r_w, float(np.linalg.norm(c_w)), tau_new)
        accepted = glob.sufficient_decrease(phi_new, phi_old, tau_new, alpha, s,
                                            c_norm, cJs_norm, cfg.eta_phi, cfg.sigma_c)

        if monitor is not None:
            monitor.check_iteration(
                k, normal=normal, tang=tang, x=x, c_val=c_val, J=J_val,
                alpha=alpha, tau=tau_new, s=s,
                tkkt_overall=tang.kkt_residual,
                subgrad_margin=tang.kkt_report.subgradient_margin,
                A_k=A_k, cJs_norm=cJs_norm,
            )

        aset = active_set(x, box)
        records.append(IterationRecord(
            k=k, x_hash=_hash_point(x), delta=normal.delta, beta=normal.beta,
            norm_v=float(np.linalg.norm(normal.v)), norm_u=float(np.linalg.norm(tang.u)),
            norm_s=s_norm, tau=tau_new, alpha=alpha,
            merit_before=phi_old, merit_after=phi_new, accepted=accepted,
            chi=chi, chi_stat=parts.stationarity, chi_comp=parts.complementarity,
            chi_bar=comp_v1, c_norm=c_norm, f_val=f_val, r_val=r_val,
            active_lower=aset.at_lower, active_upper=aset.at_upper,
            sign_pattern=_sign_pattern(x, work.reg.weights),
            wall_time=time.perf_counter() - t_iter,
        ))

        if (parts.feasibility <= cfg.tol_c and parts.stationarity <= cfg.tol_stat
                and parts.complementarity <= cfg.tol_comp):
            records[-1].accepted = False
            return finish("KktPoint", k + 1)

        if tau_new < glob.TAU_FLOOR:
            return finish("MeritCollapse", k + 1)
        merit.tau = tau_new

        vanished = s_norm / alpha <= cfg.tol_step
        if vanished:
            stall_streak += 1
            if stall_streak >= 5:
                return finish("Stalled", k + 1)
        else:
            stall_streak = 0

        if accepted:
            x = w
            f_val, r_val, c_val = f_w, r_w, c_w
            g_val = work.g(x)
            J_val = work.J(x)
        merit.record()
        if not (accepted and vanished):
            # a vanishing accepted step says nothing about the proximal
            # scale; growing alpha on it would reset the stationarity streak
            merit.alpha = glob.update_alpha(alpha, accepted, cfg.alpha_rule,
                                            cfg.xi, cfg.alpha_cap)
        if merit.alpha < glob.ALPHA_FLOOR:
            return finish("Stalled", k + 1)

    return finish("MaxIter", cfg.max_iter)


def identification_trackers(records) -> tuple:
    """Stabilization iterations for the active set and the sign pattern.

    Returns (active_set_iter, sign_pattern_iter): the first recorded
    iteration after which the respective quantity never changes again for
    the rest of the run; None when there are no records.
    """
    if not records:
        return None, None

    def stabilize(values, ks):
        last_change = 0
        for i in range(1, len(values)):
            if values[i] != values[i - 1]:
                last_change = i
        return ks[last_change]

    ks = [r.k for r in records]
    asets = [(r.active_lower, r.active_upper) for r in records]
    signs = [r.sign_pattern for r in records]
    return stabilize(asets, ks), stabilize(signs, ks)


_LEDGER_COLUMNS = [
    "k", "x_hash", "delta", "beta", "norm_v", "norm_u", "norm_s", "tau", "alpha",
    "merit_before", "merit_after", "accepted", "chi", "chi_stat", "chi_comp",
    "chi_bar", "c_norm", "f_val", "r_val", "active_lower", "active_upper",
    "sign_pattern",
]


def ledger_to_csv(records) -> str:
    """Render the iteration ledger; wall times are deliberately excluded so
    identical runs produce byte-identical output."""
    buf = io.StringIO()
    buf.write(",".join(_LEDGER_COLUMNS) + "\n")
    for r in records:
        row = [
            str(r.k), r.x_hash, repr(r.delta), repr(r.beta), repr(r.norm_v),
            repr(r.norm_u), repr(r.norm_s), repr(r.tau), repr(r.alpha),
            repr(r.merit_before), repr(r.merit_after), str(int(r.accepted)),
            repr(r.chi), repr(r.chi_stat), repr(r.chi_comp), repr(r.chi_bar),
            repr(r.c_norm), repr(r.f_val), repr(r.r_val),
            "|".join(map(str, r.active_lower)), "|".join(map(str, r.active_upper)),
            r.sign_pattern,
        ]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def report_to_json(report: SolveReport, extra: Optional[dict] = None) -> str:
    out = {
        "status": report.status,
        "iterations": report.iterations,
        "chi": report.chi,
        "c_norm": report.c_norm,
        "objective": report.objective,
        "f_unscaled": report.f_unscaled,
        "wall_time": report.wall_time,
        "config_hash": report.config_hash,
        "x": report.x.tolist(),
        "y": report.y.tolist(),
        "z": report.z.tolist(),
        "g_r": report.g_r.tolist(),
        "invariant_violations": report.invariant_violations,
    }
    if extra:
        out.update(extra)
    return json.dumps(out, indent=2, sort_keys=True)
