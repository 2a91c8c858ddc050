import os
import struct

import numpy as np
import pytest
import scipy.sparse as sp

from rbd import io as rbdio
from rbd.core import RbdConfig, RbdModel, compress_matrix, rbd_decompose
from rbd.error import Diagonal, Identity, SparseSpd
from rbd.exceptions import ParseError, UnsupportedFormat

from conftest import random_spd

TRIDIAG_MM = """%%MatrixMarket matrix coordinate real general
% 4x4 tridiagonal
4 4 10
1 1 2.0
2 2 2.0
3 3 2.0
4 4 2.0
1 2 -1.0
2 3 -1.0
3 4 -1.0
2 1 -1.5
3 2 -1.5
4 3 -1.5
"""


def tridiag_oracle():
    M = np.zeros((4, 4))
    for i in range(4):
        M[i, i] = 2.0
    for i in range(3):
        M[i, i + 1] = -1.0
        M[i + 1, i] = -1.5
    return M


class TestReadExamples:
    def test_pgm(self, tmp_path):
        p = tmp_path / "a.pgm"
        # pixels listed column by column: 0, 255 | 128, 64
        p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
        np.testing.assert_array_equal(rbdio.read_matrix(p), [[0.0, 128.0], [255.0, 64.0]])

    def test_pgm_comments_and_maxval(self, tmp_path):
        p = tmp_path / "b.pgm"
        p.write_bytes(b"P5 # comment\n3 1\n# another\n15\n" + bytes([0, 15, 5]))
        np.testing.assert_allclose(rbdio.read_matrix(p), [[0.0, 255.0, 85.0]])

    def test_csv(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\n3,4")
        np.testing.assert_array_equal(rbdio.read_matrix(p), [[1.0, 2.0], [3.0, 4.0]])

    def test_mm_coordinate(self, tmp_path):
        p = tmp_path / "t.mtx"
        p.write_text(TRIDIAG_MM)
        np.testing.assert_array_equal(rbdio.read_matrix(p), tridiag_oracle())

    def test_mm_array_column_major(self, tmp_path):
        p = tmp_path / "a.mm"
        p.write_text("%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n")
        np.testing.assert_array_equal(rbdio.read_matrix(p), [[1, 3, 5], [2, 4, 6]])

    def test_mm_symmetric(self, tmp_path):
        p = tmp_path / "s.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n"
                     "1 1 4\n2 1 -1\n2 2 4\n3 3 5\n")
        A = rbdio.read_sparse_matrix_market(p)
        assert sp.issparse(A)
        np.testing.assert_array_equal(A.toarray(), [[4, -1, 0], [-1, 4, 0], [0, 0, 5]])

    def test_ppm_channels(self, tmp_path):
        p = tmp_path / "c.ppm"
        p.write_bytes(b"P6\n2 1\n255\n" + bytes([1, 2, 3, 4, 5, 6]))
        r, g, b = rbdio.read_matrix(p)
        np.testing.assert_array_equal(r, [[1, 4]])
        np.testing.assert_array_equal(g, [[2, 5]])
        np.testing.assert_array_equal(b, [[3, 6]])


class TestErrors:
    def test_mm_bad_entry_line(self, tmp_path):
        p = tmp_path / "bad.mtx"
        p.write_text(TRIDIAG_MM.replace("3 3 2.0", "3 3 two"))
        with pytest.raises(ParseError) as info:
            rbdio.read_matrix(p)
        assert info.value.line == 6

    def test_mm_index_out_of_range(self, tmp_path):
        p = tmp_path / "bad.mtx"
        p.write_text(TRIDIAG_MM.replace("4 4 2.0", "5 4 2.0"))
        with pytest.raises(ParseError):
            rbdio.read_matrix(p)

    def test_csv_ragged(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("1,2\n3\n")
        with pytest.raises(ParseError) as info:
            rbdio.read_matrix(p)
        assert info.value.line == 2

    def test_truncated_pgm(self, tmp_path):
        p = tmp_path / "t.pgm"
        p.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        with pytest.raises(ParseError):
            rbdio.read_matrix(p)

    def test_ascii_pgm_unsupported(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P2\n1 1\n255\n7\n")
        with pytest.raises(UnsupportedFormat):
            rbdio.read_matrix(p)

    def test_unknown_extension(self, tmp_path):
        with pytest.raises(UnsupportedFormat):
            rbdio.read_matrix(tmp_path / "x.bin")

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            rbdio.read_matrix(tmp_path / "nope.csv")

    def test_bad_model_magic(self, tmp_path):
        p = tmp_path / "m.rbd"
        p.write_bytes(b"XXXX" + bytes(40))
        with pytest.raises(ParseError):
            rbdio.read_model(p)

    def test_truncated_model(self, tmp_path):
        model = rbd_decompose(np.eye(3), RbdConfig(d_max=2))
        data = rbdio.model_to_bytes(model)
        with pytest.raises(ParseError):
            rbdio.model_from_bytes(data[:-1])


class TestRoundTrips:
    def test_csv(self, tmp_path, rng):
        M = rng.standard_normal((5, 7)) * 10.0 ** rng.integers(-300, 300, (5, 7))
        p = tmp_path / "m.csv"
        rbdio.write_matrix(M, p)
        np.testing.assert_array_equal(rbdio.read_matrix(p), M)

    @pytest.mark.parametrize("coordinate", [False, True])
    def test_matrix_market(self, tmp_path, rng, coordinate):
        M = rng.standard_normal((6, 4))
        M[M < 0] = 0.0
        M[0, 0] = 5e-324
        p = tmp_path / "m.mtx"
        rbdio.write_matrix_market(M, p, coordinate=coordinate)
        np.testing.assert_array_equal(rbdio.read_matrix(p), M)

    def test_matrix_market_symmetric_weight(self, tmp_path, rng):
        A = random_spd(rng, 8, density="tri")
        p = tmp_path / "a.mtx"
        rbdio.write_matrix_market(A.toarray(), p, coordinate=True, symmetric=True)
        w = rbdio.read_weight(f"spd:{p}")
        assert isinstance(w, SparseSpd)
        np.testing.assert_array_equal(w.matrix.toarray(), A.toarray())

    def test_pgm_clamp_round(self, tmp_path, rng):
        M = rng.uniform(-20, 280, (6, 9))
        p = tmp_path / "m.pgm"
        rbdio.write_matrix(M, p)
        once = rbdio.read_matrix(p)
        np.testing.assert_array_equal(once, np.clip(np.rint(M), 0, 255))
        q = tmp_path / "n.pgm"
        rbdio.write_matrix(once, q)
        assert q.read_bytes() == p.read_bytes()

    def test_pgm_header(self, tmp_path):
        p = tmp_path / "h.pgm"
        rbdio.write_matrix(np.full((3, 5), 300.0), p)
        data = p.read_bytes()
        assert data.startswith(b"P5\n5 3\n255\n")
        assert set(data[len(b"P5\n5 3\n255\n"):]) == {255}

    def test_rank1_image_reconstruct_then_write(self, tmp_path):
        col = np.arange(1, 9, dtype=float) * 10.0
        row = np.array([1.0, 2.0, 0.5, 1.5, 2.5])
        p = tmp_path / "src.pgm"
        rbdio.write_matrix(np.outer(col, row), p)
        X = rbdio.read_matrix(p)
        model = rbd_decompose(X, RbdConfig(d_max=3, eps_r=1e-9))
        q = tmp_path / "out.pgm"
        rbdio.write_matrix(compress_matrix(model), q)
        assert q.read_bytes() == p.read_bytes()

    def test_ppm(self, tmp_path, rng):
        chans = [rng.integers(0, 256, (4, 3)).astype(float) for _ in range(3)]
        p = tmp_path / "c.ppm"
        rbdio.write_matrix(chans, p)
        for a, b in zip(rbdio.read_matrix(p), chans):
            np.testing.assert_array_equal(a, b)

    def test_labels(self, tmp_path):
        p = tmp_path / "l.txt"
        rbdio.write_labels([3, 1, 2], p)
        np.testing.assert_array_equal(rbdio.read_labels(p), [3, 1, 2])
        p.write_text("cat\n\ndog\n")
        assert rbdio.read_labels(p).tolist() == ["cat", "dog"]

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        rbdio.write_matrix(np.eye(2), tmp_path / "e.csv")
        assert os.listdir(tmp_path) == ["e.csv"]


class TestModelFile:
    @pytest.mark.parametrize("weight", ["identity", "diag", "spd"])
    def test_size_and_bit_exact(self, tmp_path, rng, weight):
        m, n = 9, 7
        X = rng.standard_normal((m, n))
        w = {"identity": Identity(), "diag": Diagonal(rng.random(m) + 0.5),
             "spd": SparseSpd(random_spd(rng, m, density="tri"))}[weight]
        model = rbd_decompose(X, RbdConfig(d_max=4, eps_r=1e-3, weight=w, breakdown_tol=1e-12))
        p = tmp_path / "m.rbd"
        rbdio.write_model(model, p)
        tag = w.tag
        assert p.stat().st_size == rbdio.model_file_size(m, n, model.d, tag)
        assert p.stat().st_size == 29 + 8 * (m * model.d + model.d * n + 1 + model.d
                                             + (m if tag == 1 else 0))
        back = rbdio.read_model(p, weight=w if tag == 2 else None)
        assert rbdio.models_equal(model, back)
        assert back.Y.tobytes() == model.Y.tobytes()
        assert back.T.tobytes() == model.T.tobytes()
        assert rbdio.model_to_bytes(back) == p.read_bytes()

    def test_layout(self):
        Y = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        T = np.array([[1.0, 2.0], [3.0, 4.0]])
        model = RbdModel(Y=Y, T=T, residual_history=[0.5, 0.25], weight=Identity(), eps_r=0.125)
        data = rbdio.model_to_bytes(model)
        assert data[:4] == b"RBD1"
        assert struct.unpack_from("<QQQB", data, 4) == (3, 2, 2, 0)
        floats = struct.unpack_from("<13d", data, 29)
        assert floats[:6] == (1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
        assert floats[6:10] == (1.0, 2.0, 3.0, 4.0)
        assert floats[10:] == (0.125, 0.5, 0.25)
        assert len(data) == 29 + 8 * 13

    def test_spd_weight_not_stored(self, tmp_path, rng):
        w = SparseSpd(random_spd(rng, 5, density="tri"))
        model = rbd_decompose(rng.standard_normal((5, 4)), RbdConfig(d_max=2, weight=w))
        back = rbdio.model_from_bytes(rbdio.model_to_bytes(model))[0]
        assert back.weight is None
        np.testing.assert_array_equal(back.Y, model.Y)

    def test_multi_record(self, tmp_path, rng):
        models = [rbd_decompose(rng.standard_normal((6, 5)), RbdConfig(d_max=k)) for k in (1, 3, 2)]
        p = tmp_path / "c.rbd"
        rbdio.write_model(models, p)
        back = rbdio.read_models(p)
        assert [b.d for b in back] == [1, 3, 2]
        assert all(rbdio.models_equal(a, b) for a, b in zip(models, back))
        with pytest.raises(ParseError):
            rbdio.read_model(p)
