"""Counts parsing, gene selection, and population serialization."""

import hashlib

import numpy as np
import pytest

from seqdepth.errors import EmptyMatrixError, ParseError
from seqdepth.ingest import (
    build_population,
    file_digest,
    filter_genes,
    load_counts,
    load_population,
    preprocess,
    read_counts_csv,
    read_counts_mtx,
    save_population,
    select_hvg,
)
from seqdepth.simplex import DiscreteDistribution, ExpressionProfile

CSV_TOY = "cell,gA,gB,gC\nc1,5,0,3\nc2,0,2,2\n"

MTX_TOY = """%%MatrixMarket matrix coordinate integer general
% cells in rows
2 3 4
1 1 5
1 3 3
2 2 2
2 3 2
"""


class TestCsvParsing:
    def test_toy_matrix(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text(CSV_TOY)
        counts = read_counts_csv(path)
        assert counts.gene_ids == ("gA", "gB", "gC")
        assert counts.cell_ids == ("c1", "c2")
        np.testing.assert_array_equal(
            counts.matrix.toarray(), [[5, 0, 3], [0, 2, 2]]
        )

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("cell,gA\nc1,2\n\nc2,3\n")
        counts = read_counts_csv(path)
        assert counts.n_cells == 2

    def test_field_count_reports_line(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("cell,gA,gB\nc1,1,2\nc2,1\n")
        with pytest.raises(ParseError) as exc:
            read_counts_csv(path)
        assert exc.value.line == 3

    def test_non_integer_reports_line(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("cell,gA\nc1,1\nc2,x\n")
        with pytest.raises(ParseError) as exc:
            read_counts_csv(path)
        assert exc.value.line == 3
        assert "'x'" in str(exc.value)

    def test_negative_count_rejected(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("cell,gA\nc1,-2\n")
        with pytest.raises(ParseError) as exc:
            read_counts_csv(path)
        assert exc.value.line == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("")
        with pytest.raises(ParseError) as exc:
            read_counts_csv(path)
        assert exc.value.line == 1

    def test_header_without_genes(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("cell\nc1\n")
        with pytest.raises(ParseError) as exc:
            read_counts_csv(path)
        assert exc.value.line == 1

    def test_no_data_rows(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("cell,gA\n")
        with pytest.raises(EmptyMatrixError):
            read_counts_csv(path)


class TestMtxParsing:
    def test_toy_matrix(self, tmp_path):
        path = tmp_path / "counts.mtx"
        path.write_text(MTX_TOY)
        counts = read_counts_mtx(path)
        assert counts.gene_ids == ("g1", "g2", "g3")
        assert counts.cell_ids == ("c1", "c2")
        np.testing.assert_array_equal(
            counts.matrix.toarray(), [[5, 0, 3], [0, 2, 2]]
        )

    def test_bad_banner(self, tmp_path):
        path = tmp_path / "counts.mtx"
        path.write_text("%%MatrixMarket matrix coordinate real general\n1 1 0\n")
        with pytest.raises(ParseError) as exc:
            read_counts_mtx(path)
        assert exc.value.line == 1

    def test_out_of_bounds_entry(self, tmp_path):
        path = tmp_path / "counts.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate integer general\n2 2 1\n3 1 4\n"
        )
        with pytest.raises(ParseError) as exc:
            read_counts_mtx(path)
        assert exc.value.line == 3

    def test_entry_count_mismatch(self, tmp_path):
        path = tmp_path / "counts.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate integer general\n2 2 2\n1 1 4\n"
        )
        with pytest.raises(ParseError) as exc:
            read_counts_mtx(path)
        assert "declared 2" in str(exc.value)

    def test_surplus_entry_reports_line(self, tmp_path):
        path = tmp_path / "counts.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate integer general\n"
            "2 2 1\n1 1 4\n2 2 7\n"
        )
        with pytest.raises(ParseError) as exc:
            read_counts_mtx(path)
        assert exc.value.line == 4

    def test_negative_value_rejected(self, tmp_path):
        path = tmp_path / "counts.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate integer general\n2 2 1\n1 1 -4\n"
        )
        with pytest.raises(ParseError) as exc:
            read_counts_mtx(path)
        assert exc.value.line == 3

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "counts.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate integer general\n"
            "% comment\n\n1 2 2\n% another\n1 1 3\n\n1 2 4\n"
        )
        counts = read_counts_mtx(path)
        np.testing.assert_array_equal(counts.matrix.toarray(), [[3, 4]])


class TestLoadCounts:
    def test_csv_extension(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text(CSV_TOY)
        assert load_counts(path).gene_ids == ("gA", "gB", "gC")

    def test_mtx_extension(self, tmp_path):
        path = tmp_path / "x.mtx"
        path.write_text(MTX_TOY)
        assert load_counts(path).n_genes == 3

    def test_sniffs_banner_without_extension(self, tmp_path):
        path = tmp_path / "mystery"
        path.write_text(MTX_TOY)
        assert load_counts(path).n_cells == 2

    def test_defaults_to_csv_without_extension(self, tmp_path):
        path = tmp_path / "mystery2"
        path.write_text(CSV_TOY)
        assert load_counts(path).cell_ids == ("c1", "c2")


def counts_from_dense(dense, gene_ids=None):
    import scipy.sparse as sp

    from seqdepth.ingest import CountsMatrix

    dense = np.asarray(dense, dtype=np.int64)
    gene_ids = gene_ids or tuple(f"g{j + 1}" for j in range(dense.shape[1]))
    cell_ids = tuple(f"c{i + 1}" for i in range(dense.shape[0]))
    return CountsMatrix(sp.csr_matrix(dense), tuple(gene_ids), cell_ids)


class TestFilterGenes:
    def test_threshold(self):
        counts = counts_from_dense(
            [[1, 0, 2], [3, 0, 0], [0, 5, 0]]
        )  # expressed-in counts: 2, 1, 1
        kept = filter_genes(counts, min_cells=2)
        assert kept.gene_ids == ("g1",)
        np.testing.assert_array_equal(kept.matrix.toarray(), [[1], [3], [0]])

    def test_zero_threshold_keeps_all(self):
        counts = counts_from_dense([[0, 1], [0, 2]])
        kept = filter_genes(counts, min_cells=0)
        assert kept.n_genes == 2

    def test_nothing_survives(self):
        counts = counts_from_dense([[1, 0], [0, 1]])
        with pytest.raises(EmptyMatrixError):
            filter_genes(counts, min_cells=2)

    def test_negative_threshold(self):
        counts = counts_from_dense([[1]])
        with pytest.raises(ValueError):
            filter_genes(counts, min_cells=-1)


class TestSelectHvg:
    def test_dispersion_ranking_and_tie_break(self):
        # dispersions: [1,5] -> var 4, mean 3 -> 4/3 for both tied genes;
        # [0,10] -> var 25, mean 5 -> 5.  Tie breaks to the smaller id "ga".
        counts = counts_from_dense(
            [[1, 0, 1], [5, 10, 5]], gene_ids=("gb", "gX", "ga")
        )
        kept = select_hvg(counts, d_target=2)
        # input column order is preserved: gX (col 1) before ga (col 2)
        assert kept.gene_ids == ("gX", "ga")
        np.testing.assert_array_equal(kept.matrix.toarray(), [[0, 1], [10, 5]])

    def test_target_at_least_width_is_identity(self):
        counts = counts_from_dense([[1, 2], [3, 4]])
        assert select_hvg(counts, d_target=2) is counts
        assert select_hvg(counts, d_target=5) is counts

    def test_zero_mean_gene_ranks_last(self):
        counts = counts_from_dense([[0, 3], [0, 9]], gene_ids=("dead", "live"))
        kept = select_hvg(counts, d_target=1)
        assert kept.gene_ids == ("live",)

    def test_target_validation(self):
        counts = counts_from_dense([[1]])
        with pytest.raises(ValueError):
            select_hvg(counts, d_target=0)


class TestBuildPopulation:
    def test_rows_normalized(self):
        counts = counts_from_dense([[5, 0, 3], [0, 2, 2]])
        mu, info = build_population(counts)
        assert mu.n_atoms == 2
        assert mu.uniform
        np.testing.assert_allclose(
            mu.dense_matrix(), [[5 / 8, 0, 3 / 8], [0, 0.5, 0.5]]
        )
        assert info["n_cells_dropped_zero"] == 0
        assert info["cell_ids"] == ["c1", "c2"]

    def test_zero_rows_dropped(self):
        counts = counts_from_dense([[2, 2], [0, 0], [1, 3]])
        mu, info = build_population(counts)
        assert mu.n_atoms == 2
        assert info["n_cells_dropped_zero"] == 1
        assert info["cell_ids"] == ["c1", "c3"]

    def test_all_zero_rejected(self):
        counts = counts_from_dense([[0, 0], [0, 0]])
        with pytest.raises(EmptyMatrixError):
            build_population(counts)


class TestPreprocess:
    def test_pipeline_and_provenance(self):
        counts = counts_from_dense(
            [[1, 0, 1, 0], [5, 0, 10, 3], [2, 0, 0, 1]],
        )
        mu, provenance, selected = preprocess(counts, min_cells=2, d_target=2)
        assert provenance["n_cells_in"] == 3
        assert provenance["n_genes_in"] == 4
        assert provenance["n_genes_after_filter"] == 3  # g2 expressed in no cell
        assert provenance["n_genes_selected"] == 2
        assert selected.n_genes == 2
        assert mu.dim == 2
        assert mu.n_atoms == 3


class TestPopulationRoundTrip:
    def _population(self):
        atoms = [
            ExpressionProfile([0, 3], [0.25, 0.75], 5),
            ExpressionProfile([1, 2, 4], [0.1, 0.2, 0.7], 5),
        ]
        return DiscreteDistribution(atoms, np.array([0.3, 0.7]))

    def test_weighted_round_trip_exact(self, tmp_path):
        mu = self._population()
        out = tmp_path / "pop"
        save_population(mu, out, provenance={"source": "unit-test"})
        loaded, meta = load_population(out)
        assert loaded.n_atoms == mu.n_atoms
        assert loaded.dim == mu.dim
        np.testing.assert_array_equal(loaded.weights, mu.weights)
        for a, b in zip(loaded.atoms, mu.atoms):
            np.testing.assert_array_equal(a.indices, b.indices)
            np.testing.assert_array_equal(a.values, b.values)
        assert meta["provenance"]["source"] == "unit-test"
        assert meta["uniform_weights"] is False

    def test_uniform_round_trip(self, tmp_path, small_population):
        out = tmp_path / "pop"
        save_population(small_population, out)
        loaded, meta = load_population(out)
        assert meta["uniform_weights"] is True
        assert loaded.uniform
        np.testing.assert_array_equal(loaded.weights, small_population.weights)

    def test_sidecar_files_written(self, tmp_path):
        out = tmp_path / "pop"
        save_population(self._population(), out, gene_ids=[f"G{i}" for i in range(5)])
        for name in (
            "profiles.mtx",
            "frequencies.txt",
            "gene_ids.txt",
            "cell_ids.txt",
            "meta.json",
        ):
            assert (out / name).exists()
        assert (out / "gene_ids.txt").read_text().splitlines() == [
            "G0",
            "G1",
            "G2",
            "G3",
            "G4",
        ]

    def test_missing_directory(self, tmp_path):
        with pytest.raises(ParseError):
            load_population(tmp_path / "nope")


class TestFileDigest:
    def test_matches_hashlib(self, tmp_path):
        path = tmp_path / "blob.bin"
        payload = b"0123456789" * 1000
        path.write_bytes(payload)
        assert file_digest(path) == hashlib.sha256(payload).hexdigest()
