"""Data ingestion, centering, the synthetic two-view generator and
serialization of matrices and run reports.

Matrices are stored features-by-samples, matching every formula in the
solvers.  CSV files carry one matrix row per line with 17-significant-
digit decimals, so save/load round-trips are exact for double precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ParseError

SCHEMA_VERSION = 1

REPORT_KEYS = (
    "schema_version",
    "solver",
    "k",
    "objective_trace",
    "grad_norms",
    "gaps",
    "iterations",
    "termination_reason",
    "wall_time_seconds",
    "seed",
    "config",
)


@dataclass
class SyntheticSpec:
    """Two latent-factor views: a shared factor of dimension
    ceil(max(m, n)/2), a second factor of dimension ceil(2 max(m, n)/5),
    plus isotropic noise of scale ``lam``."""

    m: int
    n: int
    q: int
    lam: float = 2e-4
    seed: int = 0

    def __post_init__(self):
        if min(self.m, self.n, self.q) < 1:
            raise ContractViolation("m, n, q must all be >= 1")
        if self.lam < 0:
            raise ContractViolation("lam must be nonnegative")

    @property
    def d_z(self):
        return math.ceil(max(self.m, self.n) / 2)

    @property
    def d_w(self):
        return math.ceil(2 * max(self.m, self.n) / 5)


def center(S):
    """Subtract the row means; every formula downstream assumes this."""
    S = np.asarray(S, dtype=float)
    return S - S.mean(axis=1, keepdims=True)


def gen_synthetic(spec):
    """Draw the two views S_X (m x q) and S_Y (n x q).

    All factor matrices are standard normal, each drawn from its own
    substream of the seed in the fixed order Z, W, P_X, Q_X, P_Y, Q_Y,
    E_X, E_Y, so outputs are bitwise reproducible per seed.  Outputs are
    NOT centered; callers center explicitly.
    """
    m, n, q = spec.m, spec.n, spec.q
    d_z, d_w = spec.d_z, spec.d_w
    streams = np.random.SeedSequence(spec.seed).spawn(8)
    draw = [np.random.default_rng(s) for s in streams]
    Z = draw[0].standard_normal((d_z, q))
    W = draw[1].standard_normal((d_w, q))
    P_X = draw[2].standard_normal((m, d_z))
    Q_X = draw[3].standard_normal((m, d_w))
    P_Y = draw[4].standard_normal((n, d_z))
    Q_Y = draw[5].standard_normal((n, d_w))
    E_X = draw[6].standard_normal((m, q))
    E_Y = draw[7].standard_normal((n, q))
    S_X = P_X @ Z + Q_X @ W + spec.lam * E_X
    S_Y = P_Y @ Z + Q_Y @ W + spec.lam * E_Y
    return S_X, S_Y


def load_matrix(path, header=False):
    """Parse a CSV matrix (one row per line, comma separated).

    Raises ParseError with the offending line/column for ragged rows,
    non-numeric tokens or an empty file.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if header:
        lines = lines[1:]
    rows = []
    width = None
    offset = 2 if header else 1
    for li, line in enumerate(lines, start=offset):
        if line == "" and li - offset + 1 == len(lines):
            break  # trailing newline
        tokens = line.split(",")
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise ParseError(
                f"ragged row: expected {width} columns, got {len(tokens)}",
                path=path,
                line=li,
            )
        row = []
        for ci, tok in enumerate(tokens, start=1):
            try:
                row.append(float(tok))
            except ValueError:
                raise ParseError(
                    f"non-numeric token {tok.strip()!r}", path=path, line=li, column=ci
                ) from None
        rows.append(row)
    if not rows:
        raise ParseError("empty file", path=path, line=1)
    return np.array(rows, dtype=float)


def save_matrix(M, path):
    """Write a matrix as CSV with 17 significant digits (lossless for
    IEEE doubles)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        for row in M:
            fh.write(",".join(f"{x:.17g}" for x in row))
            fh.write("\n")


def make_report(
    solver,
    k,
    objective_trace,
    grad_norms,
    gaps,
    iterations,
    termination_reason,
    wall_time_seconds,
    seed,
    config,
    **extra,
):
    """Assemble the canonical report payload; extra keys ride along."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "solver": solver,
        "k": k,
        "objective_trace": [float(v) for v in objective_trace],
        "grad_norms": [float(v) for v in grad_norms],
        "gaps": [float(v) for v in gaps],
        "iterations": int(iterations),
        "termination_reason": termination_reason,
        "wall_time_seconds": float(wall_time_seconds),
        "seed": seed,
        "config": config,
    }
    payload.update(extra)
    return payload


def write_report(payload, path):
    """Serialize a report deterministically (sorted keys, fixed layout)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
