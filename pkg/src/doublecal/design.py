"""Fixed-size sampling designs on the sub-population U_B.

Unit indices used here are *positions within U_B* (0 .. N_B-1); a frame maps
them to rows through ``Frame.b_rows``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
IndexArray = npt.NDArray[np.intp]


class DomainError(ValueError):
    """Arguments outside the domain of a design or formula."""


class DesignKind(enum.Enum):
    SRSWOR = "srswor"
    EXPLICIT = "explicit"


def srswor_probs(n_b: int, n: int) -> tuple[float, float]:
    """First- and second-order inclusion probabilities under SRSWOR."""
    if not 0 < n < n_b:
        raise DomainError(f"SRSWOR needs 0 < n < N_B, got n={n}, N_B={n_b}")
    return n / n_b, n * (n - 1) / (n_b * (n_b - 1))


@dataclass(frozen=True)
class SampleDraw:
    indices: IndexArray
    seed: object = None

    @property
    def n(self) -> int:
        return int(self.indices.shape[0])


@dataclass(frozen=True)
class SampleProbabilities:
    """Inclusion probabilities restricted to the units of one sample.

    Under SRSWOR ``pi_joint`` is the common scalar pi_jh and ``srswor`` carries
    (N_B, n), so variance code can use the closed-form reduction.
    """

    pi: FloatArray
    pi_joint: FloatArray | float
    srswor: tuple[int, int] | None = None


@dataclass(frozen=True, eq=False)
class Design:
    n_b: int
    n: int
    kind: DesignKind
    pi: FloatArray | None = field(default=None, repr=False)
    joint: FloatArray | None = field(default=None, repr=False)

    @classmethod
    def srswor(cls, n_b: int, n: int) -> Design:
        srswor_probs(n_b, n)
        return cls(n_b=n_b, n=n, kind=DesignKind.SRSWOR)

    @classmethod
    def explicit(cls, pi: npt.ArrayLike, pi_joint: npt.ArrayLike, atol: float = 1e-9) -> Design:
        """A fixed-size design given by its first- and second-order probabilities.

        ``pi_joint`` is the N_B x N_B matrix of pair probabilities; its diagonal
        is ignored and replaced by ``pi``.
        """
        p = np.asarray(pi, dtype=np.float64).reshape(-1)
        pj = np.array(pi_joint, dtype=np.float64)
        n_b = p.shape[0]
        if pj.shape != (n_b, n_b):
            raise DomainError(f"pi_joint must be {n_b}x{n_b}")
        if np.any(p <= 0) or np.any(p > 1 + atol):
            raise DomainError("first-order probabilities must lie in (0, 1]")
        if not np.allclose(pj, pj.T, atol=atol, rtol=0):
            raise DomainError("pi_joint is not symmetric")
        np.fill_diagonal(pj, p)
        off = ~np.eye(n_b, dtype=bool)
        if np.any(pj[off] > np.minimum.outer(p, p)[off] + atol):
            raise DomainError("pi_jh exceeds min(pi_j, pi_h)")
        total = p.sum()
        n = int(round(total))
        if abs(total - n) > 1e-6 * max(1.0, total):
            raise DomainError(f"sum of pi is {total}, not an integer sample size")
        if not 0 < n <= n_b:
            raise DomainError(f"implied sample size {n} outside (0, N_B]")
        pj.setflags(write=False)
        p.setflags(write=False)
        return cls(n_b=n_b, n=n, kind=DesignKind.EXPLICIT, pi=p, joint=pj)

    @classmethod
    def census(cls, n_b: int) -> Design:
        """Every unit of U_B is observed (pi = pi_jh = 1)."""
        return cls.explicit(np.ones(n_b), np.ones((n_b, n_b)))

    @property
    def is_census(self) -> bool:
        return self.n == self.n_b

    def first_order(self, indices: npt.ArrayLike | None = None) -> FloatArray:
        idx = np.arange(self.n_b) if indices is None else np.asarray(indices)
        if self.kind is DesignKind.SRSWOR:
            return np.full(idx.shape[0], self.n / self.n_b)
        return self.pi[idx]

    def second_order(self, indices: npt.ArrayLike | None = None) -> FloatArray:
        """Matrix of pi_jh over the given units (diagonal holds pi_j)."""
        idx = np.arange(self.n_b) if indices is None else np.asarray(indices)
        if self.kind is DesignKind.SRSWOR:
            p, pjh = srswor_probs(self.n_b, self.n)
            m = np.full((idx.shape[0], idx.shape[0]), pjh)
            np.fill_diagonal(m, p)
            return m
        return self.joint[np.ix_(idx, idx)]

    def probabilities(self, draw: SampleDraw) -> SampleProbabilities:
        if self.kind is DesignKind.SRSWOR:
            _, pjh = srswor_probs(self.n_b, self.n)
            return SampleProbabilities(self.first_order(draw.indices), pjh, (self.n_b, self.n))
        return SampleProbabilities(self.first_order(draw.indices), self.second_order(draw.indices))

    def draw(self, rng: np.random.Generator) -> SampleDraw:
        if self.kind is DesignKind.SRSWOR:
            return draw_srswor(self.n_b, self.n, rng)
        if self.is_census:
            return SampleDraw(indices=np.arange(self.n_b))
        raise NotImplementedError("selection is only implemented for SRSWOR and census designs")


def draw_srswor(n_b: int, n: int, rng: np.random.Generator) -> SampleDraw:
    """Uniform random n-subset of range(N_B), returned sorted."""
    srswor_probs(n_b, n)
    idx = rng.choice(n_b, size=n, replace=False)
    idx.sort()
    return SampleDraw(indices=idx.astype(np.intp))
