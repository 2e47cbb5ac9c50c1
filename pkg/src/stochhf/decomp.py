"""Factorization of a pairwise interaction into one-body operator products.

The real symmetric two-body matrix V[sigma(i1, j1), sigma(i2, j2)] is
diagonalized, V = sum_s w_s q_s q_s^T, and each eigenvector q_s is reshaped
into a K x K matrix O_s with O_s[i, j] = q_s[i*K + j], so that
V(1,2) = sum_s w_s O_s(1) O_s(2).

Hermiticity of V makes the matrix commute with the transpose map on the
pair index, so the diagonalization is done separately on the symmetric and
antisymmetric K x K matrix subspaces. Every O_s is then exactly symmetric or
antisymmetric, degenerate eigenvalues included.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import orbital_order_hash
from .errors import ConfigError
from .coulomb import TwoBodyMatrix

__all__ = [
    "InteractionDecomposition",
    "decompose_interaction",
    "reconstruct_interaction",
    "classify_operator",
    "save_decomposition",
    "load_decomposition",
]

log = logging.getLogger(__name__)

SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"
MIXED = "mixed"

_MAGIC = b"STHFDEC\x00"
_VERSION = 1
_HEADER = struct.Struct("<8sIidIId16s")


@dataclass(frozen=True)
class InteractionDecomposition:
    omegas: np.ndarray          # (p,) signed energies, hartree
    ops: np.ndarray             # (p, K, K) real one-body matrices
    tol: float
    K: int
    n_max: int | None = None
    Z: float | None = None
    order_hash: str = field(default="")

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float).reshape(-1)
        ops = np.asarray(self.ops, dtype=float).reshape(len(omegas), self.K, self.K)
        omegas.setflags(write=False)
        ops.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "ops", ops)

    @property
    def p(self) -> int:
        return len(self.omegas)

    def classes(self, tol: float = 1e-8) -> list[str]:
        return [classify_operator(O, tol) for O in self.ops]


def classify_operator(O, tol: float = 1e-8) -> str:
    """'symmetric', 'antisymmetric' or 'mixed' by the max-norm residual."""
    O = np.asarray(O)
    if O.ndim != 2 or O.shape[0] != O.shape[1]:
        raise ValueError("classify_operator needs a square matrix")
    if np.max(np.abs(O - O.T), initial=0.0) <= tol:
        return SYMMETRIC
    if np.max(np.abs(O + O.T), initial=0.0) <= tol:
        return ANTISYMMETRIC
    return MIXED


def _pair_subspace_bases(K):
    """Orthonormal bases (columns, length K^2) of symmetric and antisymmetric matrices."""
    n_sym = K * (K + 1) // 2
    n_anti = K * (K - 1) // 2
    S = np.zeros((K * K, n_sym))
    A = np.zeros((K * K, n_anti))
    s = a = 0
    r = 1.0 / np.sqrt(2.0)
    for i in range(K):
        S[i * K + i, s] = 1.0
        s += 1
        for j in range(i + 1, K):
            S[i * K + j, s] = S[j * K + i, s] = r
            A[i * K + j, a] = r
            A[j * K + i, a] = -r
            s += 1
            a += 1
    return S, A


def _fix_sign(vec):
    k = np.argmax(np.abs(vec))
    return -vec if vec[k] < 0 else vec


def decompose_interaction(V: TwoBodyMatrix, tol: float | None = None,
                          symmetry_tol: float = 1e-10) -> InteractionDecomposition:
    """Diagonalize V into (w_s, O_s) pairs, keeping |w_s| > tol.

    ``tol=None`` uses 1e-12 times the largest |w_s|. Retained terms are
    sorted by descending |w_s|; eigenvector signs are fixed so the
    largest-magnitude component is positive.
    """
    M = np.asarray(V.entries, dtype=float)
    K = V.K
    if M.size and np.max(np.abs(M - M.T)) > symmetry_tol:
        raise ValueError("two-body matrix is not symmetric under particle exchange")
    if tol is not None and tol < 0:
        raise ValueError("tol must be >= 0")
    M = 0.5 * (M + M.T)

    # transpose map on the pair index: (i, j) -> (j, i)
    perm = np.arange(K * K).reshape(K, K).T.reshape(-1)
    hermitian = not M.size or np.max(np.abs(M - M[np.ix_(perm, perm)])) <= symmetry_tol

    vals, vecs = [], []
    try:
        if hermitian:
            for B in _pair_subspace_bases(K):
                if B.shape[1] == 0:
                    continue
                w, u = np.linalg.eigh(B.T @ M @ B)
                vals.append(w)
                vecs.append(B @ u)
        else:
            log.warning("two-body matrix is not Hermitian; operators may be mixed")
            w, u = np.linalg.eigh(M)
            vals.append(w)
            vecs.append(u)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc

    w = np.concatenate(vals) if vals else np.zeros(0)
    Q = np.concatenate(vecs, axis=1) if vecs else np.zeros((K * K, 0))
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if tol is None:
        tol = 1e-12 * scale
    order = np.argsort(-np.abs(w), kind="stable")
    keep = [s for s in order if abs(w[s]) > tol]
    omegas = w[keep]
    ops = np.array([_fix_sign(Q[:, s]).reshape(K, K) for s in keep]).reshape(len(keep), K, K)
    return InteractionDecomposition(
        omegas=omegas, ops=ops, tol=float(tol), K=K, n_max=V.n_max, Z=V.Z,
        order_hash=orbital_order_hash(V.n_max) if V.n_max else "",
    )


def reconstruct_interaction(d: InteractionDecomposition) -> TwoBodyMatrix:
    K = d.K
    flat = d.ops.reshape(d.p, K * K)
    entries = (flat.T * d.omegas) @ flat if d.p else np.zeros((K * K, K * K))
    return TwoBodyMatrix(K=K, entries=entries, Z=d.Z if d.Z is not None else 2.0, n_max=d.n_max)


def save_decomposition(d: InteractionDecomposition, path) -> None:
    """Write a decomposition file; ``.json`` gives JSON, anything else binary."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = {
            "format": "stochhf-decomposition",
            "version": _VERSION,
            "n_max": d.n_max,
            "Z": d.Z,
            "K": d.K,
            "p": d.p,
            "tol": d.tol,
            "orbital_order_hash": d.order_hash,
            "terms": [
                {"omega": float(w), "op": [float(x) for x in O.reshape(-1)]}
                for w, O in zip(d.omegas, d.ops)
            ],
        }
        path.write_text(json.dumps(doc, indent=1))
        return
    head = _HEADER.pack(
        _MAGIC, _VERSION, -1 if d.n_max is None else d.n_max,
        float("nan") if d.Z is None else d.Z, d.K, d.p, d.tol,
        d.order_hash.encode("ascii").ljust(16, b"\0")[:16],
    )
    body = np.empty((d.p, 1 + d.K * d.K), dtype="<f8")
    body[:, 0] = d.omegas
    body[:, 1:] = d.ops.reshape(d.p, -1)
    path.write_bytes(head + body.tobytes())


def load_decomposition(path) -> InteractionDecomposition:
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        if doc.get("format") != "stochhf-decomposition":
            raise ConfigError(f"{path} is not a decomposition file")
        K = int(doc["K"])
        terms = doc["terms"]
        return InteractionDecomposition(
            omegas=np.array([t["omega"] for t in terms], dtype=float),
            ops=np.array([t["op"] for t in terms], dtype=float).reshape(len(terms), K, K),
            tol=float(doc["tol"]), K=K, n_max=doc.get("n_max"), Z=doc.get("Z"),
            order_hash=doc.get("orbital_order_hash", ""),
        )
    raw = path.read_bytes()
    if len(raw) < _HEADER.size or raw[:8] != _MAGIC:
        raise ConfigError(f"{path} is not a decomposition file")
    magic, version, n_max, Z, K, p, tol, h = _HEADER.unpack_from(raw)
    if version != _VERSION:
        raise ConfigError(f"unsupported decomposition file version {version}")
    if len(raw) != _HEADER.size + 8 * p * (1 + K * K):
        raise ConfigError(f"{path} is truncated or has trailing data")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(p, 1 + K * K)
    return InteractionDecomposition(
        omegas=body[:, 0].copy(), ops=body[:, 1:].reshape(p, K, K).copy(), tol=tol, K=K,
        n_max=None if n_max < 0 else n_max, Z=None if np.isnan(Z) else Z,
        order_hash=h.rstrip(b"\0").decode("ascii"),
    )
