"""Counts ingestion and population construction.

Counts come in as cells-by-genes integer matrices, either CSV (header row of
gene ids, first column cell ids) or MatrixMarket coordinate integer files
(rows are cells, columns genes, 1-based).  Both parsers are hand-rolled so
malformed input reports the offending line number.  A population is the
uniform distribution over the row-normalized profiles after gene filtering
and dispersion-based selection.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import EmptyMatrixError, ParseError
from .simplex import DiscreteDistribution, ExpressionProfile

logger = logging.getLogger(__name__)

DEFAULT_MIN_CELLS = 10
DEFAULT_HVG = 1000

POPULATION_FILES = (
    "profiles.mtx",
    "frequencies.txt",
    "gene_ids.txt",
    "cell_ids.txt",
    "meta.json",
)


@dataclass(frozen=True)
class CountsMatrix:
    """Sparse cells-by-genes integer counts with row/column identifiers."""

    matrix: sp.csr_matrix
    gene_ids: tuple
    cell_ids: tuple

    @property
    def n_cells(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_genes(self) -> int:
        return self.matrix.shape[1]


def _parse_count(token: str, line_no: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"expected an integer count, got {token!r}", line=line_no) from None
    if value < 0:
        raise ParseError(f"counts must be nonnegative, got {value}", line=line_no)
    return value


def read_counts_csv(path) -> CountsMatrix:
    """CSV counts: header of gene ids (first cell ignored), rows of cell id
    followed by one integer per gene."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        gene_ids = [g.strip() for g in header[1:]]
        if not gene_ids:
            raise ParseError("header declares no genes", line=1)
        cell_ids = []
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(gene_ids) + 1:
                raise ParseError(
                    f"expected {len(gene_ids) + 1} fields, got {len(row)}", line=line_no
                )
            cell_ids.append(row[0].strip())
            rows.append([_parse_count(tok, line_no) for tok in row[1:]])
    if not rows:
        raise EmptyMatrixError(f"no cell rows in {path}")
    dense = np.asarray(rows, dtype=np.int64)
    return CountsMatrix(
        matrix=sp.csr_matrix(dense),
        gene_ids=tuple(gene_ids),
        cell_ids=tuple(cell_ids),
    )


def read_counts_mtx(path) -> CountsMatrix:
    """MatrixMarket 'coordinate integer general' counts, cells in rows."""
    path = Path(path)
    with open(path) as fh:
        line_no = 1
        banner = fh.readline()
        if not banner:
            raise ParseError("empty file", line=1)
        fields = banner.strip().lower().split()
        if fields[:1] != ["%%matrixmarket"] or fields[1:5] != [
            "matrix",
            "coordinate",
            "integer",
            "general",
        ]:
            raise ParseError(
                "expected '%%MatrixMarket matrix coordinate integer general' banner", line=1
            )
        dims = None
        for line in fh:
            line_no += 1
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'rows cols nnz', got {stripped!r}", line=line_no)
            try:
                dims = tuple(int(p) for p in parts)
            except ValueError:
                raise ParseError(f"non-integer size field in {stripped!r}", line=line_no) from None
            break
        if dims is None:
            raise ParseError("missing size line", line=line_no)
        n_cells, n_genes, nnz = dims
        if n_cells < 1 or n_genes < 1:
            raise EmptyMatrixError(f"matrix declared as {n_cells} x {n_genes}")
        ri = np.empty(nnz, dtype=np.int64)
        ci = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.int64)
        seen = 0
        for line in fh:
            line_no += 1
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'row col value', got {stripped!r}", line=line_no)
            if seen >= nnz:
                raise ParseError(f"more than the declared {nnz} entries", line=line_no)
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer index in {stripped!r}", line=line_no) from None
            v = _parse_count(parts[2], line_no)
            if not (1 <= i <= n_cells and 1 <= j <= n_genes):
                raise ParseError(f"index ({i}, {j}) out of bounds", line=line_no)
            ri[seen] = i - 1
            ci[seen] = j - 1
            vals[seen] = v
            seen += 1
    if seen != nnz:
        raise ParseError(f"declared {nnz} entries but found {seen}", line=line_no)
    matrix = sp.csr_matrix((vals, (ri, ci)), shape=(n_cells, n_genes), dtype=np.int64)
    gene_ids = tuple(f"g{j + 1}" for j in range(n_genes))
    cell_ids = tuple(f"c{i + 1}" for i in range(n_cells))
    return CountsMatrix(matrix=matrix, gene_ids=gene_ids, cell_ids=cell_ids)


def load_counts(path) -> CountsMatrix:
    """Dispatch on extension; falls back to sniffing the MatrixMarket banner."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".csv":
        return read_counts_csv(path)
    if suffix in (".mtx", ".mm"):
        return read_counts_mtx(path)
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("%%MatrixMarket"):
        return read_counts_mtx(path)
    return read_counts_csv(path)


def filter_genes(counts: CountsMatrix, min_cells: int = DEFAULT_MIN_CELLS) -> CountsMatrix:
    """Keep genes expressed (count > 0) in at least ``min_cells`` cells."""
    if min_cells < 0:
        raise ValueError(f"min_cells must be nonnegative, got {min_cells}")
    expressed = (counts.matrix > 0).sum(axis=0)
    keep = np.asarray(expressed).ravel() >= min_cells
    if not np.any(keep):
        raise EmptyMatrixError(
            f"no gene is expressed in at least {min_cells} cells"
        )
    kept_idx = np.flatnonzero(keep)
    return CountsMatrix(
        matrix=counts.matrix[:, kept_idx].tocsr(),
        gene_ids=tuple(counts.gene_ids[j] for j in kept_idx),
        cell_ids=counts.cell_ids,
    )


def select_hvg(counts: CountsMatrix, d_target: int = DEFAULT_HVG) -> CountsMatrix:
    """Keep the ``d_target`` genes with the largest dispersion.

    Dispersion is variance/mean of the raw counts across cells (population
    variance); zero-mean genes get dispersion 0.  Ties break lexicographically
    on gene id, and the kept genes preserve their input order.
    """
    if d_target < 1:
        raise ValueError(f"d_target must be at least 1, got {d_target}")
    X = counts.matrix
    n = X.shape[0]
    mean = np.asarray(X.mean(axis=0)).ravel()
    mean_sq = np.asarray(X.multiply(X).mean(axis=0)).ravel()
    var = np.maximum(mean_sq - mean**2, 0.0)
    dispersion = np.divide(var, mean, out=np.zeros_like(var), where=mean > 0)
    if d_target >= X.shape[1]:
        return counts
    order = sorted(
        range(X.shape[1]), key=lambda j: (-dispersion[j], counts.gene_ids[j])
    )
    kept = np.sort(np.asarray(order[:d_target]))
    return CountsMatrix(
        matrix=X[:, kept].tocsr(),
        gene_ids=tuple(counts.gene_ids[j] for j in kept),
        cell_ids=counts.cell_ids,
    )


def build_population(counts: CountsMatrix) -> tuple[DiscreteDistribution, dict]:
    """Uniform distribution over row-normalized cell profiles.

    All-zero cells cannot be normalized and are dropped with a warning.
    """
    X = counts.matrix.tocsr()
    row_sums = np.asarray(X.sum(axis=1)).ravel()
    keep = row_sums > 0
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        logger.warning("dropping %d cells with zero total counts", dropped)
    if not np.any(keep):
        raise EmptyMatrixError("every cell has zero total counts")
    atoms = []
    kept_ids = []
    for i in np.flatnonzero(keep):
        start, end = X.indptr[i], X.indptr[i + 1]
        idx = X.indices[start:end]
        vals = X.data[start:end].astype(np.float64)
        atoms.append(ExpressionProfile(idx, vals / row_sums[i], X.shape[1]))
        kept_ids.append(counts.cell_ids[i])
    mu = DiscreteDistribution(atoms, None)
    info = {
        "n_cells_in": counts.n_cells,
        "n_cells_dropped_zero": dropped,
        "n_cells_out": mu.n_atoms,
        "cell_ids": kept_ids,
    }
    return mu, info


def preprocess(
    counts: CountsMatrix,
    min_cells: int = DEFAULT_MIN_CELLS,
    d_target: int = DEFAULT_HVG,
) -> tuple[DiscreteDistribution, dict, CountsMatrix]:
    """Gene filter, dispersion selection, then row normalization."""
    filtered = filter_genes(counts, min_cells=min_cells)
    selected = select_hvg(filtered, d_target=d_target)
    mu, info = build_population(selected)
    provenance = {
        "n_cells_in": counts.n_cells,
        "n_genes_in": counts.n_genes,
        "min_cells": min_cells,
        "n_genes_after_filter": filtered.n_genes,
        "hvg_target": d_target,
        "n_genes_selected": selected.n_genes,
        "dispersion": "variance/mean on raw counts",
        **{k: v for k, v in info.items() if k != "cell_ids"},
    }
    return mu, provenance, selected


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_population(
    mu: DiscreteDistribution,
    out_dir,
    gene_ids=None,
    cell_ids=None,
    provenance: dict | None = None,
):
    """Serialize a population directory (profiles.mtx + sidecars)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nnz = sum(p.l0 for p in mu.atoms)
    with open(out / "profiles.mtx", "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{mu.n_atoms} {mu.dim} {nnz}\n")
        for i, atom in enumerate(mu.atoms, start=1):
            for j, v in zip(atom.indices, atom.values):
                fh.write(f"{i} {j + 1} {float(v)!r}\n")
    with open(out / "frequencies.txt", "w") as fh:
        for w in mu.weights:
            fh.write(f"{float(w)!r}\n")
    gene_ids = gene_ids or [f"g{j + 1}" for j in range(mu.dim)]
    cell_ids = cell_ids or [f"c{i + 1}" for i in range(mu.n_atoms)]
    with open(out / "gene_ids.txt", "w") as fh:
        fh.write("\n".join(gene_ids) + "\n")
    with open(out / "cell_ids.txt", "w") as fh:
        fh.write("\n".join(cell_ids) + "\n")
    meta = {
        "n_atoms": mu.n_atoms,
        "dim": mu.dim,
        "uniform_weights": bool(mu.uniform),
        "provenance": provenance or {},
    }
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_population(pop_dir) -> tuple[DiscreteDistribution, dict]:
    """Read back a population directory written by save_population."""
    pop = Path(pop_dir)
    mtx = pop / "profiles.mtx"
    if not mtx.exists():
        raise ParseError(f"{mtx} not found; not a population directory")
    with open(mtx) as fh:
        line_no = 1
        banner = fh.readline()
        fields = banner.strip().lower().split()
        if fields[:1] != ["%%matrixmarket"] or fields[1:5] != [
            "matrix",
            "coordinate",
            "real",
            "general",
        ]:
            raise ParseError("expected a real coordinate MatrixMarket banner", line=1)
        dims = None
        for line in fh:
            line_no += 1
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'rows cols nnz', got {stripped!r}", line=line_no)
            dims = tuple(int(p) for p in parts)
            break
        if dims is None:
            raise ParseError("missing size line", line=line_no)
        n_atoms, dim, nnz = dims
        by_row: list[tuple[list, list]] = [([], []) for _ in range(n_atoms)]
        seen = 0
        for line in fh:
            line_no += 1
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'row col value', got {stripped!r}", line=line_no)
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"malformed entry {stripped!r}", line=line_no) from None
            if not (1 <= i <= n_atoms and 1 <= j <= dim):
                raise ParseError(f"index ({i}, {j}) out of bounds", line=line_no)
            by_row[i - 1][0].append(j - 1)
            by_row[i - 1][1].append(v)
            seen += 1
    if seen != nnz:
        raise ParseError(f"declared {nnz} entries but found {seen}", line=line_no)
    atoms = [
        ExpressionProfile(np.asarray(idx, dtype=np.int64), np.asarray(vals), dim)
        for idx, vals in by_row
    ]
    freq_path = pop / "frequencies.txt"
    weights = None
    meta = {}
    meta_path = pop / "meta.json"
    if meta_path.exists():
        with open(meta_path) as fh:
            meta = json.load(fh)
    if freq_path.exists():
        weights = np.array([float(s) for s in freq_path.read_text().split()])
    if meta.get("uniform_weights", False):
        weights = None
    return DiscreteDistribution(atoms, weights), meta
