"""Scale-invariant spectral fingerprints and their pairwise distances.

A fingerprint is the sorted eigenvalue list scaled by its first nonzero
entry; leading zeros are kept, so closed surfaces and Dirichlet shapes
can sit in one collection and be compared on a common sorted prefix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZero, LengthMismatch


@dataclass(frozen=True)
class ShapeDna:
    values: np.ndarray
    scale_factor: float
    zero_count: int
    label: str = ""


@dataclass(frozen=True)
class DissimilarityMatrix:
    matrix: np.ndarray
    labels: list

    @property
    def n(self) -> int:
        return len(self.labels)


def normalize_dna(spectrum, zero_tol: float | None = None,
                  label: str = "") -> ShapeDna:
    """Divide by the first eigenvalue above zero_tol; entries at or
    below the tolerance are zeroed and retained."""
    values = np.asarray(getattr(spectrum, "values", spectrum), dtype=np.float64)
    if len(values) < 2:
        raise ValueError("need at least 2 eigenvalues")
    values = np.sort(values)
    if zero_tol is None:
        zero_tol = 1e-6 * values.max()
    nonzero = np.flatnonzero(values > zero_tol)
    if nonzero.size == 0:
        raise AllZero(f"no eigenvalue above zero_tol={zero_tol}")
    first = int(nonzero[0])
    scale = values[first]
    out = np.concatenate([np.zeros(first), values[first:] / scale])
    if not label:
        label = getattr(spectrum, "meta", {}).get("label", "") \
            if hasattr(spectrum, "meta") else ""
    return ShapeDna(values=out, scale_factor=float(scale),
                    zero_count=first, label=label)


def dna_distance(a: ShapeDna, b: ShapeDna, k: int) -> float:
    """Euclidean distance of the first k fingerprint entries."""
    if len(a.values) < k or len(b.values) < k:
        raise LengthMismatch(
            f"need {k} entries, have {len(a.values)} and {len(b.values)}")
    return float(np.linalg.norm(a.values[:k] - b.values[:k]))


def dissimilarity_matrix(dnas: list, k: int | None = None) -> DissimilarityMatrix:
    if len(dnas) < 2:
        raise ValueError("need at least 2 fingerprints")
    if k is None:
        k = min(min(len(d.values) for d in dnas), 50)
    mat = np.zeros((len(dnas), len(dnas)))
    for i in range(len(dnas)):
        for j in range(i + 1, len(dnas)):
            mat[i, j] = mat[j, i] = dna_distance(dnas[i], dnas[j], k)
    labels = [d.label or f"shape-{i}" for i, d in enumerate(dnas)]
    return DissimilarityMatrix(matrix=mat, labels=labels)


# ---------------------------------------------------------------------------
# CSV formats

_F = "%.17g"


def dna_to_csv(dna: ShapeDna) -> str:
    lines = ["# cpdna dna",
             f"# label={dna.label} scale_factor={_F % dna.scale_factor} "
             f"zero_count={dna.zero_count}",
             "index,value"]
    lines += [f"{i},{_F % v}" for i, v in enumerate(dna.values)]
    return "\n".join(lines) + "\n"


def dna_from_csv(text: str) -> ShapeDna:
    label, scale, zero_count = "", float("nan"), 0
    vals = []
    for line in text.splitlines():
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("label="):
                    label = tok[len("label="):]
                elif tok.startswith("scale_factor="):
                    scale = float(tok.split("=", 1)[1])
                elif tok.startswith("zero_count="):
                    zero_count = int(tok.split("=", 1)[1])
        elif line and not line.startswith("index"):
            vals.append(float(line.split(",")[1]))
    return ShapeDna(values=np.array(vals), scale_factor=scale,
                    zero_count=zero_count, label=label)


def dissim_to_csv(dm: DissimilarityMatrix, k: int | None = None) -> str:
    lines = ["# cpdna dissimilarity" + (f" k={k}" if k else ""),
             "label," + ",".join(dm.labels)]
    for lab, row in zip(dm.labels, dm.matrix):
        lines.append(lab + "," + ",".join(_F % v for v in row))
    return "\n".join(lines) + "\n"


def dissim_from_csv(text: str) -> DissimilarityMatrix:
    labels, rows = [], []
    header = None
    for line in text.splitlines():
        if line.startswith("#") or not line.strip():
            continue
        if header is None:
            header = line.split(",")[1:]
            continue
        parts = line.split(",")
        labels.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    return DissimilarityMatrix(matrix=np.array(rows), labels=labels)
