"""Complex Clifford algebra, the canonical spin representation, and form maps.

``Cl(n)`` has generators ``e_1..e_n`` with ``e_i**2 = -1`` and
``e_i e_j = -e_j e_i``. Elements are stored sparsely as a map from sorted
index tuples to complex coefficients.

The spin representation for ``n = 2m`` acts on ``Lambda^{0,*}(C^m)``, with
basis vectors labelled by subsets ``S`` of ``{1..m}`` (bit ``k-1`` of the
row index is set when ``k`` is in ``S``). With ``a_k^+`` the wedge by the
``k``-th (0,1)-covector and ``a_k`` its contraction,

    Gamma(e_{2k-1}) = a_k^+ - a_k,      Gamma(e_{2k}) = 1j * (a_k^+ + a_k),

i.e. wedge minus contraction. Then ``Gamma(omega)`` acts on ``|S>`` by
``1j**m * (-1)**(m - |S|)``, so ``W+`` is spanned by forms of degree ``|S| = m mod 2``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError


# -- Clifford algebra -------------------------------------------------------

def _blade_product(I: tuple, J: tuple) -> tuple[int, tuple]:
    """``e_I e_J = sign * e_K``: bubble-sort the concatenation, squaring repeated generators to -1."""
    seq = list(I) + list(J)
    sign = 1
    # insertion sort with swap counting
    for a in range(1, len(seq)):
        b = a
        while b > 0 and seq[b - 1] > seq[b]:
            seq[b - 1], seq[b] = seq[b], seq[b - 1]
            sign = -sign
            b -= 1
    out = []
    k = 0
    while k < len(seq):
        if k + 1 < len(seq) and seq[k] == seq[k + 1]:
            sign = -sign
            k += 2
        else:
            out.append(seq[k])
            k += 1
    return sign, tuple(out)


@dataclass(frozen=True)
class CliffordElement:
    n: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be positive")
        clean = {}
        for key, c in self.coeffs.items():
            key = tuple(key)
            if list(key) != sorted(set(key)) or (key and (key[0] < 1 or key[-1] > self.n)):
                raise DomainError(f"basis key {key} is not a sorted subset of 1..{self.n}")
            if c != 0:
                clean[key] = complex(c)
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def scalar(cls, n: int, c=1.0) -> "CliffordElement":
        return cls(n, {(): c})

    @classmethod
    def basis(cls, n: int, *indices: int) -> "CliffordElement":
        """Product ``e_{i1} ... e_{ik}`` for arbitrary (possibly unsorted or repeated) indices."""
        out = cls.scalar(n)
        for i in indices:
            out = out * cls(n, {(i,): 1.0})
        return out

    @classmethod
    def vector(cls, v) -> "CliffordElement":
        v = np.asarray(v)
        return cls(v.size, {(i + 1,): c for i, c in enumerate(v)})

    def coefficient(self, key) -> complex:
        return self.coeffs.get(tuple(key), 0j)

    def grade(self, k: int) -> "CliffordElement":
        return CliffordElement(self.n, {key: c for key, c in self.coeffs.items() if len(key) == k})

    def _same(self, other):
        if other.n != self.n:
            raise DomainError(f"Clifford elements from Cl({self.n}) and Cl({other.n})")

    def __add__(self, other):
        if not isinstance(other, CliffordElement):
            other = CliffordElement.scalar(self.n, other)
        self._same(other)
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0j) + c
        return CliffordElement(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return CliffordElement(self.n, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, CliffordElement):
            return clifford_product(self, other)
        return CliffordElement(self.n, {k: c * other for k, c in self.coeffs.items()})

    def __rmul__(self, other):
        return CliffordElement(self.n, {k: other * c for k, c in self.coeffs.items()})

    def allclose(self, other, atol: float = 1e-12) -> bool:
        keys = set(self.coeffs) | set(other.coeffs)
        return all(abs(self.coefficient(k) - other.coefficient(k)) <= atol for k in keys)


def clifford_product(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    if a.n != b.n:
        raise DomainError(f"cannot multiply elements of Cl({a.n}) and Cl({b.n})")
    out: dict = {}
    for I, ca in a.coeffs.items():
        for J, cb in b.coeffs.items():
            s, K = _blade_product(I, J)
            out[K] = out.get(K, 0j) + s * ca * cb
    return CliffordElement(a.n, out)


def volume_element(n: int) -> CliffordElement:
    if n < 2 or n % 2:
        raise DomainError(f"volume element needs even n, got {n}")
    return CliffordElement(n, {tuple(range(1, n + 1)): 1.0})


# -- spin representation ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpinRep:
    m: int
    gamma: tuple
    metric: np.ndarray

    @property
    def n(self) -> int:
        return 2 * self.m

    @property
    def dim(self) -> int:
        return 2**self.m

    def of_vector(self, v) -> np.ndarray:
        v = np.asarray(v)
        return sum(c * g for c, g in zip(v, self.gamma))

    def of(self, x: CliffordElement) -> np.ndarray:
        """Matrix of a Clifford element (the representation extended multiplicatively)."""
        if x.n != self.n:
            raise DomainError(f"element of Cl({x.n}) acting on a Cl({self.n}) module")
        out = np.zeros((self.dim, self.dim), complex)
        for key, c in x.coeffs.items():
            mat = np.eye(self.dim, dtype=complex)
            for i in key:
                mat = mat @ self.gamma[i - 1]
            out += c * mat
        return out

    def subsets(self) -> list[tuple]:
        """Subset label of each basis vector."""
        return [tuple(k + 1 for k in range(self.m) if (r >> k) & 1) for r in range(self.dim)]


def _creation(m: int, k: int) -> np.ndarray:
    dim = 2**m
    mat = np.zeros((dim, dim), complex)
    bit = 1 << (k - 1)
    for r in range(dim):
        if not r & bit:
            sign = (-1) ** bin(r & (bit - 1)).count("1")
            mat[r | bit, r] = sign
    return mat


@lru_cache(maxsize=8)
def build_spin_rep(m: int) -> SpinRep:
    if not 1 <= m <= 6:
        raise DomainError(f"spin representation supported for 1 <= m <= 6, got {m}")
    gam = []
    for k in range(1, m + 1):
        cr = _creation(m, k)
        an = cr.conj().T
        gam.append(cr - an)
        gam.append(1j * (cr + an))
    for g in gam:
        g.setflags(write=False)
    metric = np.eye(2**m)
    metric.setflags(write=False)
    return SpinRep(m, tuple(gam), metric)


def semi_spinor_projectors(rep: SpinRep):
    """``P+-`` onto the ``+-1j**m`` eigenspaces of ``Gamma(omega)``."""
    w = rep.of(volume_element(rep.n))
    ph = (-1j) ** rep.m
    eye = np.eye(rep.dim)
    return 0.5 * (eye + ph * w), 0.5 * (eye - ph * w)


def half_basis(rep: SpinRep, sign: int = +1) -> np.ndarray:
    """Columns: the standard basis vectors spanning ``W+`` (sign=+1) or ``W-``."""
    parity = rep.m % 2 if sign > 0 else (rep.m + 1) % 2
    cols = [r for r in range(rep.dim) if bin(r).count("1") % 2 == parity]
    return np.eye(rep.dim)[:, cols]


# -- forms ------------------------------------------------------------------

def _perm_sign(seq) -> int:
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class Form:
    """Degree-``k`` form on ``R^n``: sorted index tuple -> coefficient of ``e_{i1}^...^e_{ik}``.

    ``kind`` tags the scalar type ("real", "imaginary" or "complex") and is checked.
    """

    n: int
    k: int
    coeffs: dict = field(default_factory=dict)
    kind: str = "complex"

    def __post_init__(self):
        clean = {}
        for key, c in self.coeffs.items():
            key = tuple(key)
            if len(key) != self.k:
                raise DomainError(f"index tuple {key} does not have degree {self.k}")
            s = _perm_sign(key)
            if s == 0 or min(key, default=1) < 1 or max(key, default=1) > self.n:
                raise DomainError(f"invalid index tuple {key}")
            skey = tuple(sorted(key))
            clean[skey] = clean.get(skey, 0j) + s * complex(c)
        clean = {kk: c for kk, c in clean.items() if c != 0}
        if self.kind == "real" and any(abs(c.imag) > 0 for c in clean.values()):
            raise DomainError("real form with complex coefficients")
        if self.kind == "imaginary" and any(abs(c.real) > 0 for c in clean.values()):
            raise DomainError("imaginary form with non-imaginary coefficients")
        if self.kind not in ("real", "imaginary", "complex"):
            raise DomainError(f"unknown form kind {self.kind!r}")
        object.__setattr__(self, "coeffs", clean)

    def coefficient(self, key) -> complex:
        s = _perm_sign(key)
        return s * self.coeffs.get(tuple(sorted(key)), 0j) if s else 0j

    def __add__(self, other: "Form") -> "Form":
        if (other.n, other.k) != (self.n, self.k):
            raise DomainError("forms of different degree or dimension")
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0j) + c
        kind = self.kind if self.kind == other.kind else "complex"
        return Form(self.n, self.k, out, kind)

    def __mul__(self, c) -> "Form":
        return Form(self.n, self.k, {key: c * v for key, v in self.coeffs.items()}, "complex")

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    def allclose(self, other: "Form", atol: float = 1e-12) -> bool:
        keys = set(self.coeffs) | set(other.coeffs)
        return all(abs(self.coeffs.get(k, 0j) - other.coeffs.get(k, 0j)) <= atol for k in keys)


def hodge_star(form: Form) -> Form:
    """Euclidean Hodge star with ``e_I ^ *e_I = e_1 ^ ... ^ e_n``."""
    full = set(range(1, form.n + 1))
    out = {}
    for key, c in form.coeffs.items():
        comp = tuple(sorted(full - set(key)))
        out[comp] = out.get(comp, 0j) + _perm_sign(key + comp) * c
    return Form(form.n, form.n - form.k, out, form.kind)


def selfdual_part(form: Form) -> Form:
    return 0.5 * (form + hodge_star(form))


def antiselfdual_part(form: Form) -> Form:
    return 0.5 * (form - hodge_star(form))


SELFDUAL_BASIS = ({(1, 2): 1, (3, 4): 1}, {(1, 3): 1, (2, 4): -1}, {(1, 4): 1, (2, 3): 1})
ANTISELFDUAL_BASIS = ({(1, 2): 1, (3, 4): -1}, {(1, 3): 1, (2, 4): 1}, {(1, 4): 1, (2, 3): -1})


def alt_map(form: Form) -> CliffordElement:
    """Skew-symmetrisation ``v1^...^vk -> (1/k!) sum sgn(s) v_s1 ... v_sk`` on basis forms."""
    out = {key: c for key, c in form.coeffs.items()}
    return CliffordElement(form.n, out)


def alternating_product(vectors) -> CliffordElement:
    """``(1/k!) sum_s sgn(s) v_s(1) ... v_s(k)`` for arbitrary vectors (independent of :func:`alt_map`)."""
    vectors = [np.asarray(v) for v in vectors]
    n = vectors[0].size
    k = len(vectors)
    total = CliffordElement.scalar(n, 0.0)
    for perm in itertools.permutations(range(k)):
        prod = CliffordElement.scalar(n)
        for i in perm:
            prod = prod * CliffordElement.vector(vectors[i])
        total = total + _perm_sign(perm) * prod
    return total * (1.0 / math.factorial(k))


def wedge_vectors(vectors) -> Form:
    """Form ``v1 ^ ... ^ vk`` from its coordinate vectors."""
    vectors = [np.asarray(v) for v in vectors]
    n = vectors[0].size
    k = len(vectors)
    mat = np.array(vectors)
    coeffs = {}
    for key in itertools.combinations(range(n), k):
        coeffs[tuple(i + 1 for i in key)] = np.linalg.det(mat[:, key]) if k else 1.0
    return Form(n, k, coeffs)


def rho(form: Form, rep: SpinRep) -> np.ndarray:
    """Clifford multiplication by a form: ``Gamma(alt_map(form))``."""
    if form.n != rep.n:
        raise DomainError(f"form on R^{form.n} acting on the Cl({rep.n}) module")
    return rep.of(alt_map(form))


def rho_half(form: Form, rep: SpinRep, sign: int = +1) -> np.ndarray:
    """Restriction of ``rho(form)`` to ``W+`` (sign=+1) or ``W-`` in the standard basis of that half."""
    B = half_basis(rep, sign)
    return B.T @ rho(form, rep) @ B


def sigma_pm(endo, rep: SpinRep, sign: int = +1, tol: float = 1e-10) -> Form:
    """Imaginary (anti-)selfdual 2-form ``eta`` with ``rho_half(eta) = endo`` (n = 4)."""
    if rep.n != 4:
        raise DomainError("sigma_pm is defined for n = 4")
    endo = np.asarray(endo, complex)
    if endo.shape != (2, 2):
        raise DomainError("endomorphism of a semi-spinor space must be 2x2")
    if np.abs(endo - endo.conj().T).max() > tol:
        raise DomainError("endomorphism is not Hermitian")
    if abs(np.trace(endo)) > tol:
        raise DomainError("endomorphism is not traceless")
    basis = SELFDUAL_BASIS if sign > 0 else ANTISELFDUAL_BASIS
    imgs = [rho_half(Form(4, 2, {k: 1j * c for k, c in b.items()}, "imaginary"), rep, sign) for b in basis]
    A = np.array([np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in imgs]).T
    rhs = np.concatenate([endo.real.ravel(), endo.imag.ravel()])
    x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.abs(A @ x - rhs).max() > tol * max(1.0, np.abs(rhs).max()):
        raise DomainError("endomorphism is not in the image of the (anti-)selfdual forms")
    out = {}
    for xk, b in zip(x, basis):
        for key, c in b.items():
            out[key] = out.get(key, 0j) + 1j * xk * c
    return Form(4, 2, out, "imaginary")


def quadratic_map(phi, rep: SpinRep) -> np.ndarray:
    """``phi phi^* - |phi|^2/2 Id`` for ``phi`` in ``W+`` coordinates (n = 4)."""
    if rep.n != 4:
        raise DomainError("quadratic_map is defined for n = 4")
    phi = np.asarray(phi, complex).ravel()
    if phi.size != rep.dim // 2:
        raise DomainError(f"W+ spinor must have {rep.dim // 2} components")
    return np.outer(phi, phi.conj()) - 0.5 * np.vdot(phi, phi).real * np.eye(phi.size)


# -- identity suite ---------------------------------------------------------

def _random_selfdual(rng, sign):
    basis = SELFDUAL_BASIS if sign > 0 else ANTISELFDUAL_BASIS
    out = {}
    for b in basis:
        x = rng.normal()
        for key, c in b.items():
            out[key] = out.get(key, 0j) + 1j * x * c
    return Form(4, 2, out, "imaginary")


def _random_traceless_hermitian(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h = a + a.conj().T
    return h - 0.5 * np.trace(h) * np.eye(2)


def identity_suite(m: int, rng: np.random.Generator, samples: int = 20) -> dict:
    """Max error of each algebraic identity for ``Cl(2m)`` acting on its spin module.

    Exhaustive over basis elements, plus ``samples`` random vectors or forms.
    The form/endomorphism round trips are specific to ``n = 4`` and are
    omitted for other ``m``.
    """
    rep = build_spin_rep(m)
    n, dim = rep.n, rep.dim
    eye = np.eye(dim)
    err: dict = {}
    one = CliffordElement.scalar(n)

    e2 = 0.0
    for i in range(1, n + 1):
        ei = CliffordElement.basis(n, i)
        alg = (ei * ei + one).coeffs
        e2 = max(e2, max((abs(c) for c in alg.values()), default=0.0),
                 float(np.abs(rep.gamma[i - 1] @ rep.gamma[i - 1] + eye).max()))
    err["e_i^2 = -1"] = e2

    anti = 0.0
    for i in range(n):
        for j in range(n):
            ac = rep.gamma[i] @ rep.gamma[j] + rep.gamma[j] @ rep.gamma[i]
            anti = max(anti, float(np.abs(ac + 2.0 * (i == j) * eye).max()))
            if i != j:
                ei, ej = CliffordElement.basis(n, i + 1), CliffordElement.basis(n, j + 1)
                anti = max(anti, max((abs(c) for c in (ei * ej + ej * ei).coeffs.values()), default=0.0))
    err["anticommutation"] = anti

    w = volume_element(n)
    target = (-1) ** m
    w2 = w * w - CliffordElement.scalar(n, target)
    wm = rep.of(w)
    err["omega^2 = (-1)^m"] = max(max((abs(c) for c in w2.coeffs.values()), default=0.0),
                                  float(np.abs(wm @ wm - target * eye).max()))

    vecs = [np.eye(n)[k] for k in range(n)] + [rng.normal(size=n) for _ in range(samples)]
    gg = 0.0
    for v in vecs:
        g = rep.of_vector(v)
        gg = max(gg, float(np.abs(g.conj().T @ g - np.dot(v, v) * eye).max()),
                 float(np.abs(g.conj().T + g).max()))
    err["Gamma*(v) Gamma(v) = |v|^2"] = gg

    Pp, Pm = semi_spinor_projectors(rep)
    inter = max(float(np.abs(Pp @ Pp - Pp).max()), float(np.abs(Pp + Pm - eye).max()),
                float(np.abs(Pp @ Pm).max()))
    for v in vecs:
        g = rep.of_vector(v)
        inter = max(inter, float(np.abs(Pm @ g @ Pp - g @ Pp).max()), float(np.abs(Pp @ g @ Pm - g @ Pm).max()))
    err["semi-spinor interchange"] = inter

    alt = 0.0
    for k in range(0, min(n, 4) + 1):
        for _ in range(max(1, samples // 4)):
            vs = [rng.normal(size=n) for _ in range(k)] if k else []
            if not vs:
                continue
            a = alt_map(wedge_vectors(vs))
            b = alternating_product(vs)
            alt = max(alt, max((abs(a.coefficient(key) - b.coefficient(key))
                                for key in set(a.coeffs) | set(b.coeffs)), default=0.0))
    err["alternating map"] = alt

    if m == 2:
        rt = 0.0
        for sign in (+1, -1):
            basis = SELFDUAL_BASIS if sign > 0 else ANTISELFDUAL_BASIS
            forms = [Form(4, 2, {k: 1j * c for k, c in b.items()}, "imaginary") for b in basis]
            forms += [_random_selfdual(rng, sign) for _ in range(samples)]
            for eta in forms:
                back = sigma_pm(rho_half(eta, rep, sign), rep, sign)
                rt = max(rt, max(abs(back.coefficient(k) - eta.coefficient(k))
                                 for k in itertools.combinations(range(1, 5), 2)))
            for _ in range(samples):
                E = _random_traceless_hermitian(rng)
                rt = max(rt, float(np.abs(rho_half(sigma_pm(E, rep, sign), rep, sign) - E).max()))
        err["rho / sigma round trip"] = rt
    return err
