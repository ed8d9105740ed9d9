import numpy as np
import pytest

from openbattery.circuit import CX, GateSequence, Rotation, circuit_export, phase_distance, u3_angles
from openbattery.errors import ValidationError
from openbattery.model import ModelParams, closed_eigensystem
from openbattery.optimize import haar_sample
from openbattery.protocol import charging_unitary

SWAP = np.eye(4)[[0, 2, 1, 3]].astype(complex)
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]])
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def test_u3_roundtrip():
    for u in haar_sample(30, 2)[:, :2, :2]:
        q, _ = np.linalg.qr(u)
        r = Rotation(0, *u3_angles(q)).matrix()
        assert phase_distance(r, q) < 1e-12


@pytest.mark.parametrize("gate,cx", [(np.eye(4), 0), (CZ, 1), (CX(0, 1).matrix(), 1), (CX(1, 0).matrix(), 1),
                                     (SWAP, 3), (ISWAP, 3)])
def test_known_gates(gate, cx):
    seq = circuit_export(gate)
    assert seq.cx_count == cx
    assert phase_distance(seq.to_unitary(), gate) < 1e-10


def test_haar_gates_reconstruct():
    for u in haar_sample(60, 9):
        seq = circuit_export(u)
        assert seq.cx_count <= 3
        assert phase_distance(seq.to_unitary(), u) < 1e-10


def test_local_gate_needs_no_cx():
    a, b = haar_sample(2, 4)[:, :2, :2]
    a, _ = np.linalg.qr(a)
    b, _ = np.linalg.qr(b)
    assert circuit_export(np.kron(a, b)).cx_count == 0


def test_charging_gate_export_deterministic():
    u = charging_unitary(closed_eigensystem(ModelParams()))
    s1, s2 = circuit_export(u, seed=3), circuit_export(u, seed=3)
    assert s1.to_rows() == s2.to_rows()
    assert phase_distance(s1.to_unitary(), u) < 1e-10
    assert s1.to_rows()[0][0] in ("u3", "cx")


def test_rejects_non_unitary():
    with pytest.raises(ValidationError):
        circuit_export(2 * np.eye(4))


def test_sequence_rows():
    seq = GateSequence([Rotation(1, 0.1, 0.2, 0.3), CX(0, 1)])
    assert seq.to_rows() == [("u3", 1, -1, 0.1, 0.2, 0.3), ("cx", 0, 1, 0.0, 0.0, 0.0)]
    assert seq.cx_count == 1
