"""Two-qubit open Rabi model: parameters, spectral density, bath modes and
the closed two-qubit eigensystem.

Energies are in units of the qubit frequency ``delta`` and times in ``1/delta``.
Computational basis ordering for the two qubits is (uu, ud, du, dd), with
"up" the +1 eigenstate of sigma_z.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

# sigma_z^1 + sigma_z^2 on the two-qubit space; diagonal (2, 0, 0, -2)
SZ_TOTAL = np.kron(SZ, ID2) + np.kron(ID2, SZ)


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters of the qubits-plus-bath compound."""

    delta: float = 1.0
    j_coupling: float = -10.0
    omega0: float = 1.0
    alpha: float = 0.1
    g: float = 0.6
    omega_c: float = 30.0
    bias_epsilon: float = 1e-3
    n_modes: int = 6
    fock_cutoff: int = 4

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError(f"delta must be > 0, got {self.delta}")
        if not self.omega0 > 0:
            raise ConfigError(f"omega0 must be > 0, got {self.omega0}")
        if not self.omega_c > self.omega0:
            raise ConfigError(f"omega_c must exceed omega0, got {self.omega_c} <= {self.omega0}")
        for name in ("alpha", "g", "bias_epsilon"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ConfigError(f"n_modes must be an integer >= 1, got {self.n_modes}")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise ConfigError(f"fock_cutoff must be an integer >= 2, got {self.fock_cutoff}")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        object.__setattr__(self, "fock_cutoff", int(self.fock_cutoff))

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelParams":
        if not isinstance(data, dict):
            raise ConfigError("model parameters must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model parameter(s): {', '.join(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


def effective_bias(params: ModelParams) -> float:
    """Strength of the branch-selecting field actually applied.

    The field only matters once the bath coupling makes ``uu``/``dd``
    (near-)degenerate; at ``g = 0`` the ground state is unique and the field
    would only distort it.
    """
    return params.bias_epsilon if params.g > 0 else 0.0


def _h_shift(omega, params: ModelParams):
    return params.alpha * params.omega0 * omega * np.log(
        (params.omega_c + omega) / (params.omega_c - omega)
    )


def spectral_density(omega, params: ModelParams):
    """Bath spectral density J(omega) seen by the qubits.

    Ohmic at low frequency with slope ``2 g^2 alpha / omega0^2``, peaked near
    ``omega0`` and cut off sharply at ``omega_c`` (the cutoff itself maps to 0).
    Accepts a scalar or an array.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("spectral density is defined for omega > 0 only")
    inside = w < params.omega_c
    ws = np.where(inside, w, 0.5 * params.omega_c)
    a, w0 = params.alpha, params.omega0
    num = 2.0 * params.g**2 * w0**2 * a * ws
    den = (ws**2 - w0**2 - _h_shift(ws, params)) ** 2 + (math.pi * a * w0 * ws) ** 2
    out = np.where(inside, num / den, 0.0)
    return float(out) if out.ndim == 0 else out


def spectral_weight(params: ModelParams, lo: float = 0.0, hi: float | None = None) -> float:
    """Integral of J over (lo, hi) by adaptive quadrature."""
    hi = params.omega_c if hi is None else hi
    if hi <= lo:
        return 0.0
    # the resonance near omega0 is narrow; tell quad where it is
    points = [p for p in (params.omega0,) if lo < p < hi]
    val, _ = integrate.quad(
        lambda w: spectral_density(w, params), lo, hi,
        points=points or None, limit=400, epsabs=1e-14, epsrel=1e-12,
    )
    return val


@dataclass(frozen=True)
class DiscretizedBath:
    frequencies: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        c = np.asarray(self.couplings, dtype=float)
        if f.shape != c.shape or f.ndim != 1:
            raise ConfigError("frequencies and couplings must be 1-D arrays of equal length")
        f.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "couplings", c)

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)


def discretize_bath(params: ModelParams, method: str = "midpoint") -> DiscretizedBath:
    """Represent J(omega) by ``params.n_modes`` discrete modes.

    ``midpoint`` places modes at the centres of equal-width bins on
    (0, omega_c) with ``lambda_i^2 = J(omega_i) * width``.

    ``equal_weight`` splits (0, omega_c) into bins carrying equal spectral
    weight; each mode sits at the bin's mean frequency and carries the
    bin's integrated weight. It resolves the resonance near omega0 with
    few modes.
    """
    n = params.n_modes
    wc = params.omega_c
    if method == "midpoint":
        width = wc / n
        freqs = (np.arange(1, n + 1) - 0.5) * width
        couplings = np.sqrt(spectral_density(freqs, params) * width) if params.g > 0 else np.zeros(n)
        return DiscretizedBath(np.atleast_1d(freqs), np.atleast_1d(couplings))
    if method == "equal_weight":
        return _equal_weight_bath(params)
    raise ConfigError(f"unknown discretization method {method!r}")


def _equal_weight_bath(params: ModelParams) -> DiscretizedBath:
    n = params.n_modes
    wc = params.omega_c
    # the shape of J does not depend on g; work with g=1 and rescale
    shape = params.replace(g=1.0)
    # dense grid refined around the resonance; edges only need to be close to
    # equal-weight, the bin weights themselves are integrated exactly below
    grid = np.unique(np.concatenate([
        np.linspace(0.0, wc, 20001),
        np.linspace(max(params.omega0 - 1.0, 0.0), min(params.omega0 + 1.0, wc), 20001),
    ]))
    grid = grid[(grid > 0) & (grid < wc)]
    cum = integrate.cumulative_trapezoid(spectral_density(grid, shape), grid, initial=0.0)
    targets = cum[-1] * np.arange(1, n) / n
    edges = np.concatenate([[0.0], np.interp(targets, cum, grid), [wc]])

    freqs = np.empty(n)
    weights = np.empty(n)
    for i in range(n):
        lo, hi = edges[i], edges[i + 1]
        pts = [params.omega0] if lo < params.omega0 < hi else None
        kw = dict(points=pts, limit=400, epsabs=1e-14, epsrel=1e-12)
        weights[i] = integrate.quad(lambda w: spectral_density(w, shape), lo, hi, **kw)[0]
        freqs[i] = integrate.quad(lambda w: w * spectral_density(w, shape), lo, hi, **kw)[0] / weights[i]
    return DiscretizedBath(freqs, params.g * np.sqrt(weights))


def system_hamiltonian(params: ModelParams) -> np.ndarray:
    """4x4 two-qubit Hamiltonian in the (uu, ud, du, dd) basis."""
    d, j = params.delta, params.j_coupling
    return -0.5 * d * (np.kron(SX, ID2) + np.kron(ID2, SX)) + 0.25 * j * np.kron(SZ, SZ)


@dataclass(frozen=True)
class ClosedEigensystem:
    energies: np.ndarray
    coeff_a: float
    coeff_b: float
    eigenvectors: np.ndarray  # columns |0>..|3>

    # Bell-state labels of the eigenvectors, ground to most excited
    labels = ("a*TAFM - b*TFM+", "TFM-", "S", "a*TFM+ + b*TAFM")


def closed_coefficients(j_over_delta: float) -> tuple[float, float]:
    r = math.sqrt(16.0 + j_over_delta**2)
    norm = math.sqrt(16.0 + (r - j_over_delta) ** 2)
    return 4.0 / norm, -(r - j_over_delta) / norm


def closed_eigensystem(params: ModelParams) -> ClosedEigensystem:
    x = params.j_coupling / params.delta
    a, b = closed_coefficients(x)
    r = math.sqrt(x**2 + 16.0)
    levels = params.delta * np.array([-0.25 * r, 0.25 * x, -0.25 * x, 0.25 * r])
    s = 1.0 / math.sqrt(2.0)
    tafm = np.array([0, s, s, 0], dtype=complex)
    tfm_p = np.array([s, 0, 0, s], dtype=complex)
    tfm_m = np.array([s, 0, 0, -s], dtype=complex)
    singlet = np.array([0, s, -s, 0], dtype=complex)
    vecs = [a * tafm - b * tfm_p, tfm_m, singlet, a * tfm_p + b * tafm]
    # J > 0 swaps the order of the two middle levels
    order = np.argsort(levels, kind="stable")
    return ClosedEigensystem(
        energies=levels[order],
        coeff_a=a,
        coeff_b=b,
        eigenvectors=np.column_stack([vecs[i] for i in order]),
    )
