"""Closed-form constants: zeta values, covolumes, indices and predicted asymptotics."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .forms import HermitianForm
from .ring import (Field, OracleBoundError, QuadIdeal, factor_integer, ideal_prime_divisors,
                   index_closed_forms, sl2_index_oracle)

ZETA2 = math.pi ** 2 / 6


def kronecker_symbol(D: int, n: int) -> int:
    """Kronecker symbol (D|n) for n >= 1."""
    if n <= 0:
        raise ValueError("n must be positive")
    result = 1
    # factor 2
    while n % 2 == 0:
        n //= 2
        if D % 2 == 0:
            return 0
        if D % 8 in (3, 5):
            result = -result
    # Jacobi symbol (D|n) for odd n
    a = D % n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def character_table(D: int) -> np.ndarray:
    """Values of the Kronecker character n -> (D|n) on one period 0..|D|-1."""
    m = abs(D)
    return np.array([0] + [kronecker_symbol(D, n) for n in range(1, m)], dtype=np.int64)


@functools.lru_cache(maxsize=64)
def l_value_2(D: int, tol: float = 1e-10) -> tuple[float, float]:
    """L(2, chi_D) and a rigorous bound on the truncation error.

    Partial sums of a nonprincipal character are bounded by B = |D|/2, so
    Abel summation bounds the tail after N terms by 2B/(N+1)^2.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    B = abs(D) / 2
    N = int(math.ceil(math.sqrt(2 * B / tol)))
    chi = character_table(D)
    n = np.arange(1, N + 1, dtype=np.int64)
    terms = chi[n % abs(D)] / n.astype(np.float64) ** 2
    return float(math.fsum(terms)), 2 * B / (N + 1) ** 2


def dedekind_zeta2(K: Field, tol: float = 1e-10) -> float:
    """zeta_K(2) = zeta(2) L(2, chi_{D_K})."""
    return dedekind_zeta2_bound(K, tol)[0]


def dedekind_zeta2_bound(K: Field, tol: float = 1e-10) -> tuple[float, float]:
    """zeta_K(2) and a bound (<= tol) on its truncation error."""
    if tol < 1e-12:
        raise ValueError("tol must be >= 1e-12")
    L, err = l_value_2(K.D, tol / ZETA2)
    return ZETA2 * L, ZETA2 * err


def bianchi_volumes(K: Field) -> tuple[float, float]:
    """(volume of Gamma_K \\ H^3, volume of the cusp neighbourhood Gamma_K,inf \\ H)."""
    z = dedekind_zeta2(K)
    vol = abs(K.D) ** 1.5 * z / (4 * math.pi ** 2)
    cusp = math.sqrt(abs(K.D)) / (2 * K.omega_K)
    return vol, cusp


# ---------------------------------------------------------------------------
# Gaussian forms

def _odd_primes(n: int) -> list[int]:
    return [p for p in factor_integer(n) if p != 2]


def _chi4_product(delta: int) -> Fraction:
    out = Fraction(1)
    for p in _odd_primes(delta):
        out *= 1 + Fraction(kronecker_symbol(-1, p), p)
    return out


def humbert_coefficient(delta: int) -> Fraction:
    """Rational r with Covol(SU_{f_delta}(Z[i])) = r * pi."""
    if delta < 1:
        raise ValueError("discriminant must be positive")
    eta = Fraction(1, 2) if delta % 4 == 0 else Fraction(1)
    return eta * delta * _chi4_product(delta)


def humbert_covolume_fdelta(delta: int) -> float:
    return float(humbert_coefficient(delta)) * math.pi


def _check_gaussian(f: HermitianForm) -> None:
    if f.field.D != -4:
        raise ValueError("closed forms are only available over Q(i)")
    if f.discriminant <= 0:
        raise ValueError("form must be indefinite")


def _both_even(f: HermitianForm) -> bool:
    return f.a % 2 == 0 and f.c % 2 == 0


def iota_f(f: HermitianForm) -> int:
    _check_gaussian(f)
    f = f.primitive_part()
    d = f.discriminant
    if d % 4 == 0:
        return 2
    if _both_even(f):
        if d % 4 == 1:
            return 3
        if d % 4 == 2:
            return d % 8
    return 1


def covolume_gaussian_coefficient(f: HermitianForm) -> Fraction:
    _check_gaussian(f)
    if f.content() != 1:
        raise ValueError("form must be primitive (divide out its content first)")
    d = f.discriminant
    h = humbert_coefficient(d)
    if _both_even(f):
        if d % 4 == 1:
            return h / 3
        if d % 4 == 2:
            return h / (d % 8)
    return h


def covolume_gaussian(f: HermitianForm) -> float:
    return float(covolume_gaussian_coefficient(f)) * math.pi


# ---------------------------------------------------------------------------
# groups and constants

@dataclass(frozen=True)
class GroupDescriptor:
    kind: str  # "full" | "level" | "hecke"
    index_in_bianchi: int
    stabilizer_index: int
    iota_G: int
    ideal: Optional[QuadIdeal] = None
    swapped_index: Optional[Fraction] = None
    classical_index: Optional[Fraction] = None

    @property
    def swapped_agrees(self) -> Optional[bool]:
        if self.swapped_index is None:
            return None
        return self.swapped_index == self.index_in_bianchi

    def to_json(self) -> dict:
        out = {"kind": self.kind, "index_in_bianchi": self.index_in_bianchi,
               "stabilizer_index": self.stabilizer_index, "iota_G": self.iota_G}
        if self.ideal is not None:
            out["ideal"] = self.ideal.to_json()
            out["ideal_norm"] = self.ideal.norm()
            out["classical_index"] = str(self.classical_index)
            out["swapped_index"] = str(self.swapped_index)
            out["swapped_agrees"] = self.swapped_agrees
        return out


def full_group(K: Field) -> GroupDescriptor:
    return GroupDescriptor("full", 1, K.omega_K, 1)


def iota_ideal(ideal: QuadIdeal) -> int:
    return 1 if ideal.contains(ideal.field(2, 0)) else 2


def congruence_data(ideal: Optional[QuadIdeal], kind: str, bound: int = 4096) -> GroupDescriptor:
    """Index, stabiliser index and iota_G of Gamma_K(a) ("level") or Gamma_K,0(a) ("hecke")."""
    if kind not in ("full", "level", "hecke"):
        raise ValueError(f"unknown group kind {kind!r}")
    if ideal is None or kind == "full":
        if ideal is not None and not ideal.is_unit_ideal() and kind == "full":
            raise ValueError("full group takes no ideal")
        K = ideal.field if ideal is not None else Field(-4)
        return full_group(K)
    K = ideal.field
    if ideal.is_unit_ideal():
        return GroupDescriptor(kind, 1, K.omega_K, 1, ideal, Fraction(1), Fraction(1))
    forms = index_closed_forms(ideal)
    if kind == "level":
        index = sl2_index_oracle(ideal, "full_level", bound)
        return GroupDescriptor(kind, index, K.omega_K * ideal.norm(), iota_ideal(ideal), ideal,
                               forms["swapped"]["full_level"], forms["classical"]["full_level"])
    index = sl2_index_oracle(ideal, "hecke", bound)
    return GroupDescriptor(kind, index, K.omega_K, 1, ideal,
                           forms["swapped"]["hecke"], forms["classical"]["hecke"])


@dataclass(frozen=True)
class PredictionConstant:
    value: float
    provenance: str  # full_group | congruence_group | gaussian_closed_form | congruence_closed_form
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("predicted constant must be positive")

    def to_json(self) -> dict:
        return {"value": self.value, "provenance": self.provenance, "inputs": self.inputs}


def _general(K: Field, delta: int, covolume: float, G: GroupDescriptor, zeta: float,
             index: float) -> float:
    return (math.pi * G.iota_G * G.stabilizer_index * covolume
            / (2 * K.omega_K * abs(K.D) * zeta * delta * index))


def predicted_constant(f: HermitianForm, covolume: float, G: Optional[GroupDescriptor] = None,
                       K: Optional[Field] = None, zeta_tol: float = 1e-12) -> PredictionConstant:
    """Leading coefficient of the s^2 growth of the orbit count.

    covolume is the area of the quotient by SU_f intersected with G.
    """
    K = K or f.field
    G = G or full_group(K)
    delta = f.discriminant
    if covolume <= 0 or delta <= 0:
        raise ValueError("covolume and discriminant must be positive")
    zeta = dedekind_zeta2(K, zeta_tol)
    value = _general(K, delta, covolume, G, zeta, G.index_in_bianchi)
    inputs = {"Delta": delta, "D_K": K.D, "omega_K": K.omega_K, "zeta_K2": zeta, "covolume": covolume,
              "group": G.to_json()}
    return PredictionConstant(value, "full_group" if G.kind == "full" else "congruence_group", inputs)


def gaussian_closed_constant(f: HermitianForm, zeta_tol: float = 1e-12) -> PredictionConstant:
    _check_gaussian(f)
    f = f.primitive_part()
    delta = f.discriminant
    io = iota_f(f)
    prod = _chi4_product(delta)
    zeta = dedekind_zeta2(f.field, zeta_tol)
    value = math.pi ** 2 * float(prod) / (8 * io * zeta)
    return PredictionConstant(value, "gaussian_closed_form",
                              {"Delta": delta, "iota_f": io, "prime_product": str(prod), "zeta_K2": zeta})


def congruence_constant_swapped(f: HermitianForm, covolume: float, ideal: QuadIdeal, kind: str,
                                 zeta_tol: float = 1e-12) -> PredictionConstant:
    """Congruence constants from the closed forms with the index products interchanged.

    Reported next to the value built from oracle indices; the two differ
    whenever the swapped index disagrees with the enumerated one.
    """
    K = ideal.field
    N = ideal.norm()
    primes = [q for _, q in ideal_prime_divisors(ideal)]
    zeta = dedekind_zeta2(K, zeta_tol)
    delta = f.discriminant
    if kind == "level":
        den = N ** 2 * math.prod(1 + 1 / q for q in primes)
        value = math.pi * iota_ideal(ideal) * covolume / (2 * den * abs(K.D) * zeta * delta)
    elif kind == "hecke":
        den = N * math.prod(1 - 1 / q ** 2 for q in primes)
        value = math.pi * covolume / (2 * den * abs(K.D) * zeta * delta)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return PredictionConstant(value, "congruence_closed_form",
                              {"Delta": delta, "ideal_norm": N, "prime_norms": primes, "kind": kind,
                               "covolume": covolume, "zeta_K2": zeta})
