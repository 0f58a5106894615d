"""Orthonormal linear interconnections with affine offsets.

The interconnection maps the elements' c-outputs to their d-inputs,
d = G c + s, where G is norm-preserving.  G is built as the Cayley
transform of a skew-symmetric core assembled from the problem's linear
constraints; constant data enters through source relations that are
algebraically absorbed into the offset s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pairs import Block

__all__ = [
    "cayley",
    "check_orthonormal",
    "OrthonormalityReport",
    "AffineInterconnection",
    "SourceRelation",
    "absorb_sources",
    "from_constraints",
]


def cayley(S: np.ndarray) -> np.ndarray:
    """Map a skew-symmetric matrix to an orthonormal one, (I + S)(I - S)^-1.

    (I - S) is always invertible for skew S, and the two factors commute,
    so the result is independent of the order of composition.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    dev = S + S.T
    worst = np.unravel_index(np.abs(dev).argmax(), dev.shape)
    if abs(dev[worst]) >= 1e-12:
        raise ValueError(
            f"matrix is not skew-symmetric: (S + S.T)[{worst[0]}, {worst[1]}] "
            f"= {dev[worst]:g}"
        )
    I = np.eye(S.shape[0])
    return np.linalg.solve(I - S, I + S)


@dataclass(frozen=True)
class OrthonormalityReport:
    max_deviation: float
    passed: bool


def check_orthonormal(G: np.ndarray, tol: float = 1e-10) -> OrthonormalityReport:
    """Report the max-abs deviation of G^T G from the identity."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {G.shape}")
    dev = float(np.abs(G.T @ G - np.eye(G.shape[0])).max())
    return OrthonormalityReport(max_deviation=dev, passed=dev <= tol)


@dataclass(frozen=True)
class AffineInterconnection:
    """The map c -> G c + s.  `neutral` records whether G is orthonormal."""

    G: np.ndarray
    s: np.ndarray
    neutral: bool = True

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError(f"G must be square, got shape {G.shape}")
        if s.shape != (G.shape[0],):
            raise ValueError(f"offset shape {s.shape} does not match G {G.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("offset contains non-finite entries")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "s", s)

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    def apply(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if c.shape[-1] != self.dim:
            raise ValueError(f"vector length {c.shape[-1]} != interconnection dim {self.dim}")
        return c @ self.G.T + self.s


@dataclass(frozen=True)
class SourceRelation:
    """Affine constitutive relation c_block = F d_block + g on a block."""

    block: Block
    F: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        k = self.block.length
        if F.shape != (k, k):
            raise ValueError(f"F shape {F.shape} does not match block length {k}")
        if g.shape != (k,):
            raise ValueError(f"g shape {g.shape} does not match block length {k}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "g", g)

    def is_lossless(self, tol: float = 1e-10) -> bool:
        return bool(np.abs(self.F.T @ self.F - np.eye(self.block.length)).max() <= tol)


def absorb_sources(
    ic: AffineInterconnection, sources: list[SourceRelation]
) -> AffineInterconnection:
    """Eliminate source blocks algebraically, returning the reduced map.

    The reduced interconnection acts on the non-source coordinates (original
    order preserved) and has the same fixed points there.  The result stays
    neutral when every eliminated relation is itself lossless (orthonormal
    homogeneous part); otherwise it is flagged non-neutral.
    """
    if not sources:
        return ic
    n = ic.dim
    src_idx = np.concatenate([np.arange(s.block.offset, s.block.stop) for s in sources])
    if len(np.unique(src_idx)) != len(src_idx):
        raise ValueError("source blocks overlap")
    if src_idx.max() >= n:
        raise ValueError("source block exceeds interconnection dimension")
    keep = np.setdiff1d(np.arange(n), src_idx)

    k = len(src_idx)
    F = np.zeros((k, k))
    g = np.zeros(k)
    pos = 0
    for s in sources:
        F[pos : pos + s.block.length, pos : pos + s.block.length] = s.F
        g[pos : pos + s.block.length] = s.g
        pos += s.block.length

    G_tt = ic.G[np.ix_(keep, keep)]
    G_tk = ic.G[np.ix_(keep, src_idx)]
    G_kt = ic.G[np.ix_(src_idx, keep)]
    G_kk = ic.G[np.ix_(src_idx, src_idx)]

    loop = np.eye(k) - F @ G_kk
    if np.linalg.cond(loop) > 1e12:
        blocks = ", ".join(f"[{s.block.offset}, {s.block.stop})" for s in sources)
        raise ValueError(f"singular algebraic loop while absorbing source blocks {blocks}")
    coupler = np.linalg.solve(loop, np.column_stack([F @ G_kt, (F @ ic.s[src_idx] + g)]))
    G_red = G_tt + G_tk @ coupler[:, :-1]
    s_red = ic.s[keep] + G_tk @ coupler[:, -1]

    neutral = (
        ic.neutral
        and all(s.is_lossless() for s in sources)
        and check_orthonormal(G_red).passed
    )
    return AffineInterconnection(G=G_red, s=s_red, neutral=neutral)


def from_constraints(
    A: np.ndarray,
    free_idx: np.ndarray,
    resid_idx: np.ndarray,
    offset: np.ndarray | None = None,
) -> AffineInterconnection:
    """Build the interconnection enforcing z[resid] = A z[free] - offset.

    The homogeneous part is the Cayley transform of the skew core holding A,
    with the residual columns sign-flipped; this is exactly the reflection
    across the constraint subspace, so G is orthonormal by construction.  A
    nonzero `offset` is introduced as a bank of constant sources pinned to
    the data and absorbed into s.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    free_idx = np.asarray(free_idx, dtype=int)
    resid_idx = np.asarray(resid_idx, dtype=int)
    m, nf = A.shape
    if len(free_idx) != nf or len(resid_idx) != m:
        raise ValueError("index arrays do not match constraint matrix shape")
    n = nf + m
    all_idx = np.sort(np.concatenate([free_idx, resid_idx]))
    if not np.array_equal(all_idx, np.arange(n)):
        raise ValueError("free and residual indices must partition 0..n-1")

    if offset is None or not np.any(offset):
        S = np.zeros((n, n))
        S[np.ix_(resid_idx, free_idx)] = A
        S[np.ix_(free_idx, resid_idx)] = -A.T
        G = cayley(S)
        G[:, resid_idx] *= -1.0
        return AffineInterconnection(G=G, s=np.zeros(n), neutral=True)

    offset = np.asarray(offset, dtype=float)
    # extend with one source coordinate per constraint: z[resid] = A z[free] - v
    src_idx = np.arange(n, n + m)
    A_ext = np.column_stack([A, -np.eye(m)])
    ext = from_constraints(
        A_ext, np.concatenate([free_idx, src_idx]), resid_idx, offset=None
    )
    source = SourceRelation(
        block=Block(n, m), F=-np.eye(m), g=2.0 * offset
    )  # pins the source coordinates to the data vector
    return absorb_sources(ext, [source])
