"""Spectral phase-space solver on the periodic square with Strang splitting.

The state is F(x, theta) on [0, 2pi)^2 x S^1, stored as an (nx, nx, ntheta)
array of nodal values.  One step of size dt is

    collision(dt/2) -> free transport(dt) -> collision(dt/2),

where the transport step multiplies each spatial Fourier mode m by
exp(-i gamma (m . omega) dt) exactly, and the collision substep applies the
exact relaxation

    F <- e^{-h} F + (1 - e^{-h}) rho_F M_{J*},

with the von Mises parameter J* advanced to the substep midpoint by an Euler
predictor of the flux ODE dJ/dt = rho c(|J|) J/|J| - J (so the full splitting
is second order in dt).  Three right-hand sides are supported:

* "nonlinear":    the alignment dynamics themselves;
* "linearized":   the dynamics linearized at an equilibrium (mu, J_eq); the
                  stored field is the perturbation f with Int Int f = 0;
* "regularized":  nonlinear dynamics with the flux clamped,
                  J* -> (J*/|J*|) min(|J*|, 1/eps_reg).

Normalization: fields are normalized so the *mean* density
(2pi)^{-2} Int Int F dx domega equals mu; the equilibrium field is then
exactly mu M_{J_eq} and mu is the local mean density appearing in every
bifurcation formula.  The diagnostics `mass` column reports that mean.

Conservation properties of the discretization (all to round-off): the grid
normalization of M_{J*} makes the collision preserve the cell density
pointwise, transport preserves every angular moment of the spatial mean, and
in linearized mode the component of the mean flux perpendicular to J_eq is
conserved while the L^2 norm is nonincreasing for mu <= d.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .equilibria import solve_L
from .linstab import flux_relaxation_matrix
from .sphere import SphereGrid, build_sphere_grid, von_mises, von_mises_gradient

__all__ = [
    "InitSpec",
    "SolverConfig",
    "PhaseField",
    "SolverAbort",
    "DiagnosticsSeries",
    "RunResult",
    "EntropyFit",
    "init_field",
    "equilibrium_flux",
    "step",
    "run",
    "regularized_flux",
    "field_moments",
    "diagnostics",
    "dist_to_manifold",
    "entropy_functional",
    "fit_decay_rate",
    "fit_entropy_growth",
    "DIAGNOSTICS_HEADER",
    "write_diagnostics_csv",
    "read_diagnostics_csv",
    "write_snapshot",
    "read_snapshot",
]

MODES = ("nonlinear", "linearized", "regularized")
RECIPES = ("mode-bump", "random-smooth", "large-blob")


@dataclass(frozen=True)
class InitSpec:
    """Initial condition recipe.

    mode-bump:     equilibrium times (1 + amplitude cos(m . x)) with integer
                   torus mode m = mode_k (physical wavenumber gamma * m); in
                   linearized mode the bump itself is the perturbation.
    random-smooth: equilibrium times (1 + amplitude g) with g a fixed-seed
                   random low-mode trigonometric polynomial, |g| <= 1.
    large-blob:    an x-localized positive bump with anisotropic angular
                   profile (free parameter width), for entropy experiments.

    amplitude = 0 reproduces the exact equilibrium.
    """

    recipe: str = "mode-bump"
    amplitude: float = 0.0
    mode_k: tuple[int, int] = (1, 0)
    width: float = 0.7

    def __post_init__(self):
        # configs arrive from JSON with lists; keep the spec hashable
        object.__setattr__(self, "mode_k", tuple(int(v) for v in self.mode_k))


@dataclass(frozen=True)
class SolverConfig:
    """Full specification of a solver run (hashable, reusable)."""

    mu: float
    mode: str = "nonlinear"
    gamma: float = 10.0
    nx: int = 32
    ntheta: int = 64
    dt: float = 0.01
    t_end: float = 10.0
    eps_reg: float | None = None
    jeq_angle: float = 0.0
    init: InitSpec = field(default_factory=InitSpec)
    snapshot_every: int = 50
    seed: int = 0
    keep_snapshots: bool = False
    dealias: bool = True


@dataclass
class PhaseField:
    """Nodal phase-space density on the (x1, x2, theta) tensor grid."""

    values: np.ndarray
    gamma: float
    grid: SphereGrid

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ntheta(self) -> int:
        return self.values.shape[2]

    def copy(self) -> "PhaseField":
        return PhaseField(self.values.copy(), self.gamma, self.grid)


class SolverAbort(RuntimeError):
    """Raised when the state stops being finite; carries the failure time."""

    def __init__(self, t: float):
        super().__init__(f"non-finite state at t = {t:.6g}")
        self.t = t


def _validate(config: SolverConfig) -> None:
    if config.mode not in MODES:
        raise ValueError(f"unknown mode {config.mode!r}")
    if config.init.recipe not in RECIPES:
        raise ValueError(f"unknown init recipe {config.init.recipe!r}")
    if config.mu <= 0:
        raise ValueError("mu must be positive")
    if config.nx < 4 or config.nx % 2 or config.ntheta < 8 or config.ntheta % 2:
        raise ValueError("need even nx >= 4 and even ntheta >= 8")
    if config.dt <= 0 or config.t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    if config.mode == "regularized" and not (config.eps_reg and config.eps_reg > 0):
        raise ValueError("regularized mode requires eps_reg > 0")
    if config.snapshot_every < 1:
        raise ValueError("snapshot_every must be >= 1")
    if config.init.recipe == "large-blob" and config.mode == "linearized":
        raise ValueError("large-blob is not a perturbation recipe")
    if config.init.recipe == "mode-bump" and tuple(config.init.mode_k) == (0, 0) \
            and config.mode == "linearized":
        raise ValueError("linearized mode-bump needs a nonzero spatial mode")


def equilibrium_flux(config: SolverConfig) -> np.ndarray:
    """The background flux J_eq: zero for mu <= 2, on-branch otherwise."""
    if config.mu <= 2.0:
        return np.zeros(2)
    L = solve_L(config.mu, 2)
    return L * np.array([math.cos(config.jeq_angle), math.sin(config.jeq_angle)])


class _Workspace:
    """Precomputed grid data shared by all steps of one configuration."""

    def __init__(self, config: SolverConfig, dt: float):
        nx, ntheta = config.nx, config.ntheta
        self.grid = build_sphere_grid(2, ntheta)
        theta = self.grid.angles
        self.cos = np.cos(theta)
        self.sin = np.sin(theta)
        self.wtheta = 2.0 * math.pi / ntheta
        self.wcos = self.cos * self.wtheta
        self.wsin = self.sin * self.wtheta
        m = np.fft.fftfreq(nx, d=1.0 / nx)
        karg = np.multiply.outer(m, self.cos)[:, None, :] \
            + np.multiply.outer(m, self.sin)[None, :, :]
        self.phase = np.exp(-1j * config.gamma * dt * karg)
        cut = nx // 3
        self.dealias_mask = (np.abs(m)[:, None] > cut) | (np.abs(m)[None, :] > cut)
        self.mu = config.mu
        self.mode = config.mode
        self.dealias = config.dealias and config.mode != "linearized"
        self.jcap = 1.0 / config.eps_reg if config.mode == "regularized" else None
        self.Jeq = equilibrium_flux(config)
        self.Meq = von_mises(self.Jeq, self.grid)
        if config.mode == "linearized":
            G = von_mises_gradient(self.Jeq, self.grid)
            self.G1, self.G2 = G[0], G[1]
            self.C = flux_relaxation_matrix(config.mu, self.Jeq, self.grid)
            self.jeq_over_mu = self.Jeq / config.mu


@lru_cache(maxsize=8)
def _workspace(config: SolverConfig, dt: float) -> _Workspace:
    return _Workspace(config, dt)


def regularized_flux(J: np.ndarray, eps: float) -> np.ndarray:
    """Clamp |J| at 1/eps keeping the direction: (J/|J|) min(|J|, 1/eps)."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    J = np.asarray(J, dtype=float)
    if eps == 0:
        return J.copy()
    mag = np.linalg.norm(J, axis=-1, keepdims=True)
    fac = np.where(mag > 1.0 / eps, (1.0 / eps) / np.where(mag > 0, mag, 1.0), 1.0)
    return J * fac


def _c_over_r(r: np.ndarray) -> np.ndarray:
    """c(r)/r for the circle, i.e. I1(r)/(r I0(r)), stable as r -> 0."""
    small = r < 1e-6
    rs = np.where(small, 1.0, r)
    return np.where(small, 0.5 - r * r / 16.0,
                    special.i1e(rs) / (rs * special.i0e(rs)))


def _collide(values: np.ndarray, h: float, ws: _Workspace) -> np.ndarray:
    """Exact relaxation over a substep of span h (nonlinear/regularized)."""
    wq = ws.wtheta
    rho = values.sum(axis=2) * wq
    Jx = values @ ws.wcos
    Jy = values @ ws.wsin
    r = np.hypot(Jx, Jy)
    sfac = rho * _c_over_r(r) - 1.0
    Jsx = Jx + 0.5 * h * sfac * Jx
    Jsy = Jy + 0.5 * h * sfac * Jy
    if ws.jcap is not None:
        rs = np.hypot(Jsx, Jsy)
        shrink = np.where(rs > ws.jcap, ws.jcap / np.where(rs > 0, rs, 1.0), 1.0)
        Jsx = Jsx * shrink
        Jsy = Jsy * shrink
    rs = np.hypot(Jsx, Jsy)
    expo = Jsx[..., None] * ws.cos + Jsy[..., None] * ws.sin - rs[..., None]
    E = np.exp(expo)
    Z = E.sum(axis=2) * wq
    target = (rho / Z)[..., None] * E
    if ws.dealias:
        spec = np.fft.fft2(target, axes=(0, 1))
        spec[ws.dealias_mask] = 0.0
        target = np.fft.ifft2(spec, axes=(0, 1)).real
    decay = math.exp(-h)
    return decay * values + (1.0 - decay) * target


def _collide_linear(values: np.ndarray, h: float, ws: _Workspace) -> np.ndarray:
    """Exact relaxation of the linearized collision over span h."""
    wq = ws.wtheta
    rho = values.sum(axis=2) * wq
    Jx = values @ ws.wcos
    Jy = values @ ws.wsin
    C = ws.C
    rx = rho * ws.jeq_over_mu[0] + C[0, 0] * Jx + C[0, 1] * Jy
    ry = rho * ws.jeq_over_mu[1] + C[1, 0] * Jx + C[1, 1] * Jy
    Jsx = Jx + 0.5 * h * rx
    Jsy = Jy + 0.5 * h * ry
    target = rho[..., None] * ws.Meq \
        + ws.mu * (Jsx[..., None] * ws.G1 + Jsy[..., None] * ws.G2)
    decay = math.exp(-h)
    return decay * values + (1.0 - decay) * target


def step(F: PhaseField, dt: float, config: SolverConfig) -> PhaseField:
    """One Strang step: collision(dt/2), transport(dt), collision(dt/2)."""
    ws = _workspace(config, dt)
    collide = _collide_linear if config.mode == "linearized" else _collide
    v = collide(F.values, 0.5 * dt, ws)
    spec = np.fft.fft2(v, axes=(0, 1))
    spec *= ws.phase
    v = np.fft.ifft2(spec, axes=(0, 1)).real
    v = collide(v, 0.5 * dt, ws)
    return PhaseField(v, F.gamma, F.grid)


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def _random_smooth(nx: int, theta: np.ndarray, seed: int) -> np.ndarray:
    """Fixed-seed random trigonometric polynomial with sup norm 1."""
    rng = np.random.default_rng(seed)
    x = 2.0 * math.pi * np.arange(nx) / nx
    X1 = x[:, None, None]
    X2 = x[None, :, None]
    TH = theta[None, None, :]
    g = np.zeros((nx, nx, theta.size))
    for m1 in range(-2, 3):
        for m2 in range(-2, 3):
            for j in range(-3, 4):
                amp = rng.normal()
                pha = rng.uniform(0.0, 2.0 * math.pi)
                g = g + amp * np.cos(m1 * X1 + m2 * X2 + j * TH + pha)
    return g / np.max(np.abs(g))


def init_field(config: SolverConfig) -> PhaseField:
    """Build the initial field of a run; every recipe is rescaled so the
    mean density is exactly mu (mean zero, for linearized perturbations)."""
    _validate(config)
    ws = _workspace(config, config.dt)
    nx, ntheta = config.nx, config.ntheta
    spec = config.init
    x = 2.0 * math.pi * np.arange(nx) / nx
    base = np.broadcast_to(config.mu * ws.Meq, (nx, nx, ntheta)).copy()

    if spec.recipe == "mode-bump":
        m1, m2 = (int(v) for v in spec.mode_k)
        bump = np.cos(m1 * x[:, None, None] + m2 * x[None, :, None])
        bump = np.broadcast_to(bump, base.shape)
        if config.mode == "linearized":
            values = spec.amplitude * bump * base
        else:
            values = base * (1.0 + spec.amplitude * bump)
    elif spec.recipe == "random-smooth":
        g = _random_smooth(nx, ws.grid.angles, config.seed)
        if config.mode == "linearized":
            values = spec.amplitude * g * base
        else:
            values = base * (1.0 + spec.amplitude * g)
    else:  # large-blob
        kappa = 1.0 / spec.width**2
        bx = np.exp(kappa * (np.cos(x - math.pi) - 1.0))
        ang = (1.0 + 0.5 * ws.cos) / (2.0 * math.pi)
        values = bx[:, None, None] * bx[None, :, None] * ang[None, None, :]

    mean = values.sum() * ws.wtheta / (nx * nx)
    if config.mode == "linearized":
        # remove the mean computed with the run's own quadrature, so the
        # conserved total stays zero to round-off for all times
        values = values - mean / (2.0 * math.pi)
    else:
        if values.min() < 0.0:
            raise ValueError("initial field is negative; reduce the amplitude")
        if mean <= 0.0:
            raise ValueError("initial field has no mass")
        values = values * (config.mu / mean)
    return PhaseField(np.ascontiguousarray(values), config.gamma, ws.grid)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

DIAGNOSTICS_HEADER = "t,mass,jbar_x,jbar_y,l2,entropy,dist,rho_min,rho_max"

_COLUMNS = ("t", "mass", "jbar_x", "jbar_y", "l2", "entropy", "dist",
            "rho_min", "rho_max")


@dataclass
class DiagnosticsSeries:
    """Columnar diagnostics history of a run."""

    t: np.ndarray
    mass: np.ndarray
    jbar_x: np.ndarray
    jbar_y: np.ndarray
    l2: np.ndarray
    entropy: np.ndarray
    dist: np.ndarray
    rho_min: np.ndarray
    rho_max: np.ndarray

    @classmethod
    def from_rows(cls, rows: list[dict]) -> "DiagnosticsSeries":
        return cls(**{c: np.array([r[c] for r in rows]) for c in _COLUMNS})

    def __len__(self) -> int:
        return self.t.size


def field_moments(F: PhaseField) -> tuple[np.ndarray, np.ndarray]:
    """Cellwise density rho(x) and flux J(x): angular moments of F."""
    wq = 2.0 * math.pi / F.ntheta
    rho = F.values.sum(axis=2) * wq
    J = np.stack([F.values @ (np.cos(F.grid.angles) * wq),
                  F.values @ (np.sin(F.grid.angles) * wq)], axis=-1)
    return rho, J


def _mean_flux(F: PhaseField) -> np.ndarray:
    rho, J = field_moments(F)
    return J.mean(axis=(0, 1))


def entropy_functional(F: PhaseField) -> float:
    """Int (1/e + F log F) dx domega, with F log F extended by 0 at F <= 0."""
    v = F.values
    dvol = (2.0 * math.pi / F.nx) ** 2 * (2.0 * math.pi / F.ntheta)
    pos = v > 0.0
    s = float(np.sum(np.where(pos, v * np.log(np.where(pos, v, 1.0)), 0.0)) * dvol)
    return s + (2.0 * math.pi) ** 3 / math.e


def dist_to_manifold(F: PhaseField, mu: float) -> float:
    """L^2(dx dtheta) distance from F to the equilibrium family {mu M_J}.

    For mu <= 2 the family is the single uniform state.  Above threshold the
    direction of the closest von Mises state is located by a coarse circular
    scan refined with golden-section search (absolute tolerance 1e-10); the
    search is seeded by, and in practice agrees with, the direction of the
    mean flux of F.
    """
    grid = F.grid
    wq = 2.0 * math.pi / F.ntheta
    dx2 = (2.0 * math.pi / F.nx) ** 2
    norm2 = float(np.sum(F.values**2)) * dx2 * wq
    if mu <= 2.0:
        m0 = np.full(F.ntheta, 1.0 / (2.0 * math.pi))
        diff2 = float(np.sum((F.values - mu * m0) ** 2)) * dx2 * wq
        return math.sqrt(max(diff2, 0.0))
    L = solve_L(mu, 2)
    S = F.values.sum(axis=(0, 1)) * dx2          # S(theta) = Int F dx
    theta = grid.angles
    area2 = (2.0 * math.pi) ** 2

    def offset(phi: float) -> float:
        m = np.exp(L * (np.cos(theta - phi) - 1.0))
        m /= m.sum() * wq
        q = float((S * m).sum() * wq)
        m2 = float((m * m).sum() * wq)
        return -2.0 * mu * q + mu * mu * area2 * m2

    jbar = _mean_flux(F)
    seed = math.atan2(jbar[1], jbar[0]) if np.linalg.norm(jbar) > 0 else 0.0
    scan = seed + np.linspace(-math.pi, math.pi, 33)[:-1]
    vals = [offset(p) for p in scan]
    best = int(np.argmin(vals))
    lo = scan[best] - 2.0 * math.pi / 32
    hi = scan[best] + 2.0 * math.pi / 32
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = offset(c), offset(d)
    while hi - lo > 1e-10:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = offset(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = offset(d)
    val = norm2 + min(fc, fd)
    return math.sqrt(max(val, 0.0))


def diagnostics(F: PhaseField, mu: float) -> dict:
    """Diagnostics of a physical field: mean mass/flux, L^2 norm, entropy,
    distance to the equilibrium family, density extremes."""
    rho, J = field_moments(F)
    dx2 = (2.0 * math.pi / F.nx) ** 2
    wq = 2.0 * math.pi / F.ntheta
    jbar = J.mean(axis=(0, 1))
    return {
        "mass": float(rho.mean()),
        "jbar_x": float(jbar[0]),
        "jbar_y": float(jbar[1]),
        "l2": float(math.sqrt(np.sum(F.values**2) * dx2 * wq)),
        "entropy": entropy_functional(F),
        "dist": dist_to_manifold(F, mu),
        "rho_min": float(rho.min()),
        "rho_max": float(rho.max()),
    }


def _diagnostics_row(F: PhaseField, t: float, config: SolverConfig,
                     ws: _Workspace) -> dict:
    if config.mode == "linearized":
        phys = PhaseField(config.mu * ws.Meq + F.values, F.gamma, F.grid)
        row = diagnostics(phys, config.mu)
        rho, J = field_moments(F)
        jbar = J.mean(axis=(0, 1))
        row["mass"] = float(rho.mean())
        row["jbar_x"], row["jbar_y"] = float(jbar[0]), float(jbar[1])
        row["l2"] = float(math.sqrt(
            np.sum(F.values**2) * (2.0 * math.pi / F.nx) ** 2
            * 2.0 * math.pi / F.ntheta))
    else:
        row = diagnostics(F, config.mu)
    row["t"] = float(t)
    return row


@dataclass
class RunResult:
    """Output bundle of run(): diagnostics plus retained field snapshots."""

    config: SolverConfig
    series: DiagnosticsSeries
    snapshots: list  # [(t, values array), ...]


def run(config: SolverConfig) -> RunResult:
    """Integrate the configured problem from t = 0 to t_end.

    Diagnostics are sampled at t = 0, every snapshot_every steps, and at the
    final step.  Snapshots of the field are retained at the same cadence when
    keep_snapshots is set, otherwise only first and last.  Raises SolverAbort
    (with the failure time) as soon as the state stops being finite.
    """
    _validate(config)
    nsteps = int(round(config.t_end / config.dt))
    if abs(nsteps * config.dt - config.t_end) > 1e-9 * max(1.0, config.t_end):
        raise ValueError("t_end must be an integer multiple of dt")
    ws = _workspace(config, config.dt)
    F = init_field(config)
    rows = [_diagnostics_row(F, 0.0, config, ws)]
    snaps = [(0.0, F.values.copy())]
    for i in range(1, nsteps + 1):
        F = step(F, config.dt, config)
        t = i * config.dt
        if not np.isfinite(F.values).all():
            raise SolverAbort(t)
        if i % config.snapshot_every == 0 or i == nsteps:
            rows.append(_diagnostics_row(F, t, config, ws))
            if config.keep_snapshots:
                snaps.append((t, F.values.copy()))
    if not config.keep_snapshots and nsteps > 0:
        snaps.append((nsteps * config.dt, F.values.copy()))
    return RunResult(config=config, series=DiagnosticsSeries.from_rows(rows),
                     snapshots=snaps)


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------

def fit_decay_rate(series: DiagnosticsSeries, t_min: float, t_max: float,
                   column: str = "dist") -> tuple[float, float]:
    """Least-squares exponential rate of a diagnostics column on a window.

    Fits log(column) ~ a - rate * t over t in [t_min, t_max]; rows whose
    value is below 1e3 machine epsilons are dropped (they sit on the noise
    floor).  Returns (rate, r2); a constant column gives rate 0, r2 = 1.
    """
    if column not in _COLUMNS or column == "t":
        raise ValueError(f"unknown column {column!r}")
    t = series.t
    y = getattr(series, column)
    floor = 1e3 * np.finfo(float).eps
    mask = (t >= t_min) & (t <= t_max) & (y > floor)
    if mask.sum() < 3:
        raise ValueError("fewer than 3 usable points in the fit window")
    tt, yy = t[mask], np.log(y[mask])
    slope, intercept = np.polyfit(tt, yy, 1)
    pred = slope * tt + intercept
    ss_res = float(np.sum((yy - pred) ** 2))
    ss_tot = float(np.sum((yy - yy.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(-slope), float(r2)


@dataclass(frozen=True)
class EntropyFit:
    """Certificate E(t) <= C (1 + e^{c t}) for an entropy history."""

    c: float
    C: float
    max_violation: float


def fit_entropy_growth(series: DiagnosticsSeries) -> EntropyFit:
    """Smallest-at-the-end exponential envelope of the entropy history.

    For each c on a log grid (with c = 0 included), the smallest admissible
    prefactor is C(c) = max_t E(t)/(1 + e^{ct}); among those certificates the
    one minimizing the terminal bound C(c)(1 + e^{c t_end}) is returned (ties
    toward smaller c).  max_violation = max_t [E(t) - C(1 + e^{ct})] <= 0 by
    construction; it is reported as computed.
    """
    t = series.t
    E = series.entropy
    if not np.all(np.isfinite(E)):
        raise ValueError("entropy history contains non-finite values")
    cs = np.concatenate([[0.0], np.geomspace(1e-3, 10.0, 61)])
    best = None
    for c in cs:
        den = 1.0 + np.exp(c * t)
        C = float(np.max(E / den)) * (1.0 + 1e-12)
        terminal = C * (1.0 + math.exp(c * t[-1]))
        if best is None or terminal < best[0] - 1e-12 * abs(best[0]):
            best = (terminal, float(c), C)
    _, c, C = best
    viol = float(np.max(E - C * (1.0 + np.exp(c * t))))
    return EntropyFit(c=c, C=C, max_violation=viol)


# ---------------------------------------------------------------------------
# on-disk formats
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_diagnostics_csv(path, series: DiagnosticsSeries) -> None:
    """Write the diagnostics table (exact header, %.17g floats, \\n endings)."""
    lines = [DIAGNOSTICS_HEADER]
    for i in range(len(series)):
        lines.append(",".join(_fmt(getattr(series, c)[i]) for c in _COLUMNS))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_diagnostics_csv(path) -> DiagnosticsSeries:
    with open(path, "r") as fh:
        header = fh.readline().strip()
        if header != DIAGNOSTICS_HEADER:
            raise ValueError(f"unexpected diagnostics header: {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(_COLUMNS)))
    return DiagnosticsSeries(**{c: data[:, i] for i, c in enumerate(_COLUMNS)})


def write_snapshot(basepath, values: np.ndarray, *, gamma: float, mu: float,
                   t: float, mode: str) -> tuple[str, str]:
    """Write one field snapshot: raw little-endian float64 (x1, x2, theta in
    row-major order) plus a JSON sidecar with the grid geometry.

    basepath is the path without extension; returns (raw_path, json_path).
    """
    base = os.fspath(basepath)
    raw_path, json_path = base + ".f64", base + ".json"
    arr = np.ascontiguousarray(values, dtype="<f8")
    with open(raw_path, "wb") as fh:
        fh.write(arr.tobytes(order="C"))
    meta = {"nx": int(values.shape[0]), "ntheta": int(values.shape[2]),
            "gamma": float(gamma), "mu": float(mu), "t": float(t),
            "mode": str(mode)}
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=0, sort_keys=True)
        fh.write("\n")
    return raw_path, json_path


def read_snapshot(basepath) -> tuple[np.ndarray, dict]:
    """Read back a (values, metadata) snapshot pair written by write_snapshot."""
    base = os.fspath(basepath)
    with open(base + ".json", "r") as fh:
        meta = json.load(fh)
    nx, ntheta = int(meta["nx"]), int(meta["ntheta"])
    raw = np.fromfile(base + ".f64", dtype="<f8")
    if raw.size != nx * nx * ntheta:
        raise ValueError("snapshot payload does not match its metadata")
    return raw.reshape(nx, nx, ntheta).astype(float), meta
