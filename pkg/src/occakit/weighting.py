"""Pairwise view-affinity weights for the multiset objective.

The affinity of two centered views is the nuclear norm of their
cross-covariance normalized by the view variances; it always lies in
[0, 1].  A selection heuristic (uniform / maximum-affinity spanning tree
/ top-p) picks which pairs participate, and a soft-max over the selected
affinities produces the final weights, which sum to one over unordered
pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateViewError
from .linalg import as_matrix


@dataclass
class WeightMatrix:
    """Symmetric pair weights for ``size`` views.

    ``rho_hat`` holds the raw affinities (zero diagonal), ``rho`` the
    soft-max-normalized weights of the selected pairs (exactly zero for
    unselected ones).  The ordered double sum over i != j therefore
    totals 2, each unordered pair contributing its weight twice.
    """

    rho_hat: np.ndarray
    rho: np.ndarray
    scheme: str

    @property
    def size(self):
        return self.rho.shape[0]

    def selected_pairs(self):
        """Unordered pairs (i, j), i < j, with nonzero weight."""
        ell = self.size
        return [(i, j) for i in range(ell) for j in range(i + 1, ell) if self.rho[i, j] != 0.0]

    @classmethod
    def custom(cls, rho, rho_hat=None):
        """Wrap caller-supplied weights, normalizing them to unit sum over
        unordered pairs."""
        rho = np.asarray(rho, dtype=float)
        ell = rho.shape[0]
        if rho.shape != (ell, ell) or np.max(np.abs(rho - rho.T)) > 0 or np.any(np.diag(rho) != 0):
            raise ContractViolation("custom weights must be symmetric with zero diagonal")
        if np.any(rho < 0):
            raise ContractViolation("custom weights must be nonnegative")
        total = sum(rho[i, j] for i in range(ell) for j in range(i + 1, ell))
        if total <= 0:
            raise ContractViolation("custom weights must have a positive sum")
        if rho_hat is None:
            rho_hat = np.zeros_like(rho)
        return cls(rho_hat=rho_hat, rho=rho / total, scheme="custom")


def pairwise_rho_hat(Si, Sj):
    """Affinity of two centered views: nuclear norm of Si Sj^T over
    sqrt(tr(Si Si^T) tr(Sj Sj^T)).  Lies in [0, 1]."""
    Si = as_matrix(Si, "Si")
    Sj = as_matrix(Sj, "Sj")
    if Si.shape[1] != Sj.shape[1]:
        raise ContractViolation(
            f"views disagree on sample count: {Si.shape[1]} vs {Sj.shape[1]}"
        )
    tii = float(np.sum(Si * Si))
    tjj = float(np.sum(Sj * Sj))
    if tii == 0.0 or tjj == 0.0:
        raise DegenerateViewError("a view is identically zero after centering")
    nuc = float(np.sum(np.linalg.svd(Si @ Sj.T, compute_uv=False)))
    return nuc / np.sqrt(tii * tjj)


def rho_hat_matrix(views):
    """All pairwise affinities as a symmetric matrix with zero diagonal."""
    ell = len(views)
    R = np.zeros((ell, ell))
    for i in range(ell):
        for j in range(i + 1, ell):
            R[i, j] = R[j, i] = pairwise_rho_hat(views[i], views[j])
    return R


def parse_scheme(scheme):
    """Normalize a scheme spec: 'uniform', 'tree' or 'top:<p>' -> (name, p)."""
    if scheme in ("uniform", "tree"):
        return scheme, None
    if isinstance(scheme, str) and scheme.startswith("top:"):
        try:
            p = int(scheme.split(":", 1)[1])
        except ValueError:
            raise ContractViolation(f"bad top-p weight spec {scheme!r}") from None
        return "top", p
    raise ContractViolation(f"unknown weighting scheme {scheme!r}")


def _mst_edges(rho_hat):
    """Kruskal's algorithm on the complete graph with edge cost
    1 - rho_hat, ties broken by (cost, i, j) so runs are reproducible."""
    ell = rho_hat.shape[0]
    edges = sorted(
        (1.0 - rho_hat[i, j], i, j) for i in range(ell) for j in range(i + 1, ell)
    )
    parent = list(range(ell))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = []
    for _, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j))
            if len(tree) == ell - 1:
                break
    return tree


def select_weights(rho_hat, scheme, p=None):
    """Pick the pairs that participate in the objective.

    Returns a list of (i, j, value) over unordered pairs i < j:
    uniform keeps every pair with value 1; tree keeps the maximum-affinity
    spanning tree edges with their affinities; top-p keeps the p largest
    affinities.
    """
    rho_hat = np.asarray(rho_hat, dtype=float)
    ell = rho_hat.shape[0]
    if ell < 2:
        raise ContractViolation("need at least two views")
    name, p_parsed = parse_scheme(scheme) if isinstance(scheme, str) else (scheme, p)
    if p_parsed is not None:
        p = p_parsed

    if name == "uniform":
        return [(i, j, 1.0) for i in range(ell) for j in range(i + 1, ell)]
    if name == "tree":
        return [(i, j, float(rho_hat[i, j])) for i, j in _mst_edges(rho_hat)]
    if name == "top":
        n_pairs = ell * (ell - 1) // 2
        if p is None or not (1 <= p <= n_pairs):
            raise ContractViolation(f"top-p needs 1 <= p <= {n_pairs}, got {p}")
        ranked = sorted(
            ((i, j) for i in range(ell) for j in range(i + 1, ell)),
            key=lambda e: (-rho_hat[e[0], e[1]], e[0], e[1]),
        )
        return [(i, j, float(rho_hat[i, j])) for i, j in ranked[:p]]
    raise ContractViolation(f"unknown weighting scheme {name!r}")


def softmax_normalize(edges, size, bandwidth=20.0, rho_hat=None, scheme="custom"):
    """Soft-max the selected pair values into weights summing to 1.

    Uses the max-subtraction trick so bandwidth 20 cannot overflow, which
    also makes the result invariant to shifting all values by a constant.
    Unselected pairs stay exactly zero.
    """
    if not edges:
        raise ContractViolation("no selected pairs to normalize")
    vals = np.array([v for _, _, v in edges], dtype=float)
    ex = np.exp(bandwidth * (vals - vals.max()))
    w = ex / ex.sum()
    rho = np.zeros((size, size))
    for (i, j, _), wij in zip(edges, w):
        rho[i, j] = rho[j, i] = wij
    if rho_hat is None:
        rho_hat = np.zeros((size, size))
    return WeightMatrix(rho_hat=np.asarray(rho_hat, dtype=float), rho=rho, scheme=str(scheme))


def build_weights(views, scheme="uniform", bandwidth=20.0):
    """Affinities -> selection -> soft-max, end to end."""
    R = rho_hat_matrix(views)
    edges = select_weights(R, scheme)
    return softmax_normalize(edges, len(views), bandwidth=bandwidth, rho_hat=R, scheme=scheme)
