"""Closed forms for the two-level system coupled to two-level probes.

System and probe Hamiltonians are ``diag(0, E)`` and ``diag(0, E0)``; the
exchange coupling is ``(lam/2)(a (x) b^* + a^* (x) b)`` with
``a = b = [[0, 1], [0, 0]]``.  Everything here is an independent analytic
route, used as an oracle against the numerical constructions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .qops import Superoperator, gibbs
from .rdm import RIModel

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # lowers |1> to |0>
NUMBER = np.diag([0.0, 1.0]).astype(complex)


@dataclass(frozen=True)
class SpinParams:
    E: float
    E0: float
    lam: float
    tau: float
    beta: float

    def __post_init__(self) -> None:
        if not (self.E > 0 and self.E0 > 0):
            raise ValueError("E and E0 must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def delta(self) -> float:
        return self.E - self.E0

    @property
    def nu(self) -> float:
        return float(np.hypot(self.delta, self.lam))

    @property
    def mu(self) -> float:
        return float(np.hypot(self.E + self.E0, self.lam))

    @property
    def Z(self) -> float:
        return 1.0 + np.exp(-self.beta * self.E0)

    @property
    def beta_star(self) -> float:
        return self.E0 / self.E * self.beta

    @property
    def e0(self) -> float:
        return 1.0 - _lam_over_nu_sin(self) ** 2

    @property
    def gamma(self) -> float:
        """Relaxation rate ``-log sqrt(e0)``."""
        return -0.5 * np.log(self.e0)

    def with_(self, **kw) -> "SpinParams":
        return replace(self, **kw)


def _half_angle(p: SpinParams, n: float) -> float:
    return p.nu * p.tau * n / 2.0


def _sin_over_nu(p: SpinParams, n: float) -> float:
    """``sin(nu tau n / 2) / nu`` with the ``nu -> 0`` limit ``tau n / 2``."""
    if p.nu == 0.0:
        return p.tau * n / 2.0
    return np.sin(_half_angle(p, n)) / p.nu


def _lam_over_nu_sin(p: SpinParams) -> float:
    return p.lam * _sin_over_nu(p, 1.0)


def _C(p: SpinParams, n: float) -> complex:
    return np.cos(_half_angle(p, n)) + 1j * p.delta * _sin_over_nu(p, n)


def _S(p: SpinParams, n: float) -> float:
    return p.lam * _sin_over_nu(p, n)


def _diag_fn(f, p: SpinParams, one_minus: bool = False) -> np.ndarray:
    ns = (1.0, 0.0) if one_minus else (0.0, 1.0)
    return np.diag([f(p, n) for n in ns]).astype(complex)


def exchange_coupling(lam: float) -> np.ndarray:
    a = SIGMA_MINUS
    return 0.5 * lam * (np.kron(a, a.conj().T) + np.kron(a.conj().T, a))


def dipole_coupling(lam: float) -> np.ndarray:
    x = SIGMA_MINUS + SIGMA_MINUS.conj().T
    return 0.5 * lam * np.kron(x, x)


def build(p: SpinParams, coupling: str = "exchange") -> RIModel:
    """The toy interaction block; ``coupling="dipole"`` keeps the counter-rotating terms."""
    if coupling == "exchange":
        v = exchange_coupling(p.lam)
    elif coupling == "dipole":
        v = dipole_coupling(p.lam)
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    h_S = np.diag([0.0, p.E]).astype(complex)
    h_E = np.diag([0.0, p.E0]).astype(complex)
    return RIModel(h_S=h_S, h_E=h_E, v=v, tau=p.tau, rho_E=gibbs(h_E, p.beta))


def system_hamiltonian(p: SpinParams) -> np.ndarray:
    return np.diag([0.0, p.E]).astype(complex)


def closed_form_kraus(p: SpinParams) -> dict[str, np.ndarray]:
    """The four Kraus operators ``V_{s's}`` of the exchange model, keyed ``"00"``, ``"10"``, ``"01"``, ``"11"``."""
    a = SIGMA_MINUS
    phase = np.diag(np.exp(-1j * p.tau * (p.E + p.E0) / 2 * np.array([0.0, 1.0])))
    z = 1.0 / np.sqrt(p.Z)
    w = np.exp(-p.beta * p.E0 / 2) * z
    C_N = _diag_fn(_C, p)
    C_1mN = _diag_fn(_C, p, one_minus=True)
    S_N = _diag_fn(_S, p)
    S_1mN = _diag_fn(_S, p, one_minus=True)
    return {
        "00": z * phase @ C_N.conj(),
        "10": z * phase @ S_1mN @ a,
        "01": w * phase @ S_N @ a.conj().T,
        "11": w * phase @ C_1mN,
    }


def closed_form_channel(p: SpinParams) -> Superoperator:
    return Superoperator.from_kraus(closed_form_kraus(p).values())


def closed_form_spectrum(p: SpinParams) -> dict[str, complex]:
    s = p.delta * _sin_over_nu(p, 1.0)
    c = np.cos(p.nu * p.tau / 2)
    rot = np.exp(1j * p.tau * (p.E + p.E0) / 2)
    return {
        "one": 1.0 + 0j,
        "e_plus": rot * (c + 1j * s),
        "e_minus": (1 / rot) * (c - 1j * s),
        "e0": p.e0 + 0j,
    }


def satisfies_E(p: SpinParams, tol: float = 1e-12) -> bool:
    return 1.0 - p.e0 > tol


def gibbs_state(p: SpinParams, beta: float | None = None) -> np.ndarray:
    """System Gibbs state, by default at the renormalized ``beta* = (E0/E) beta``."""
    b = p.beta_star if beta is None else beta
    return gibbs(system_hamiltonian(p), b)


def _sinc2(x: float) -> float:
    return float(np.sinc(x / np.pi) ** 2)


def dipole_mean_work(p: SpinParams) -> float:
    """Mean power for the full dipole coupling, from the diagonal rate balance.

    The parity blocks ``{|01>, |10>}`` and ``{|00>, |11>}`` give transition
    probabilities ``A = (lam tau / 2)^2 sinc^2(nu tau / 2)`` and
    ``B = (lam tau / 2)^2 sinc^2(mu tau / 2)``; in the stationary regime the
    probe gains ``E0 * 2AB/(A+B) * tanh(beta E0 / 2)`` per interaction.
    """
    sn, sm = _sinc2(p.nu * p.tau / 2), _sinc2(p.mu * p.tau / 2)
    return p.lam**2 * p.tau * p.E0 / 2 * np.tanh(p.beta * p.E0 / 2) * sn * sm / (sn + sm)


def dipole_mean_work_literal(p: SpinParams) -> float:
    """The published closed form ``(lam^2 tau^2 E / 2) tanh(beta E0 / 2) s_nu s_mu / (s_nu + s_mu)``.

    It differs from :func:`dipole_mean_work` by the factor ``tau E / E0``.
    """
    sn, sm = _sinc2(p.nu * p.tau / 2), _sinc2(p.mu * p.tau / 2)
    return p.lam**2 * p.tau**2 * p.E / 2 * np.tanh(p.beta * p.E0 / 2) * sn * sm / (sn + sm)


def inv_Z(p: SpinParams, beta: float) -> float:
    return 1.0 / (1.0 + np.exp(-beta * p.E0))


def kbeam_invariant_states(p: SpinParams, betas: Sequence[float]) -> list[np.ndarray]:
    """Invariant state of the cyclic composition ending with beam ``j`` (after beam ``j`` acts)."""
    K = len(betas)
    e0 = p.e0
    pref = (1 - e0) / (1 - e0**K)
    out = []
    for j in range(K):
        acc = np.zeros((2, 2), dtype=complex)
        for m in range(K):
            b = betas[(j - m) % K]
            acc += e0**m * gibbs_state(p, p.E0 / p.E * b)
        out.append(pref * acc)
    return out


def kbeam_deterministic_fluxes(p: SpinParams, betas: Sequence[float]) -> np.ndarray:
    K = len(betas)
    e0 = p.e0
    pref = p.E0 * (1 - e0) ** 2 / (K * p.tau * (1 - e0**K))
    z = [inv_Z(p, b) for b in betas]
    return np.array([pref * sum((z[k] - z[j]) * e0 ** ((j - k - 1) % K) for k in range(K)) for j in range(K)])


def kbeam_random_fluxes(p: SpinParams, betas: Sequence[float]) -> np.ndarray:
    K = len(betas)
    pref = p.E0 * (1 - p.e0) / (K**2 * p.tau)
    z = [inv_Z(p, b) for b in betas]
    return np.array([pref * sum(z[k] - z[j] for k in range(K)) for j in range(K)])


def random_beta_entropy(p: SpinParams, betas: Sequence[float], probs: Sequence[float]) -> float:
    """Entropy production for i.i.d. probe temperatures drawn from a finite law."""
    b = np.asarray(betas, dtype=float)
    q = np.asarray(probs, dtype=float)
    f = 1.0 / (1.0 + np.exp(-b * p.E0))
    cov = np.sum(q * b * f) - np.sum(q * b) * np.sum(q * f)
    return p.E0 * (1 - p.e0) / p.tau * cov
