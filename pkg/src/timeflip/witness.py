"""Witness certificates, measurement decompositions, and the Born-rule pipeline.

A witness is a Hermitian operator on the five-qubit experiment layout whose
pairing with every definite-direction setup is nonnegative.  This module
validates witnesses (by certificate and by a certified minimum over the
definite cone), expands them over the product basis of preparation and
measurement projectors actually realized in the experiment, models the
resulting event probabilities, and turns (possibly noisy) probabilities back
into robustness estimates.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .sdp import (
    GAP_TOL,
    MAX_ITER,
    Block,
    ConicProgram,
    MatrixRow,
    SolveReport,
    solve,
    solve_cone_value,
)
from .supermaps import ConeId, SetupOperator, SlotSpec, span_projector
from .tensor_core import (
    HermitianOperator,
    SystemLayout,
    atomic_write_text,
    hs_inner,
    min_eigenvalue,
    qubits,
)

WIRE_LABELS = ("A_I", "A_O", "B_it", "B_ot", "B_oc")

CERTIFICATE_TOL = 1e-8
ZERO_COEFF_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-8
PROBABILITY_TOL = 1e-12

# Preparation/measurement states: the computational basis, the balanced
# superposition, and the circle state (|0> + i|1>)/sqrt(2).
STATE_KETS = (
    np.array([1.0, 0.0], dtype=complex),
    np.array([0.0, 1.0], dtype=complex),
    np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0),
)

_PROJECTORS = tuple(np.outer(k, k.conj()) for k in STATE_KETS)
_CONJ_PROJECTORS = tuple(p.conj() for p in _PROJECTORS)
_I2 = np.eye(2, dtype=complex)


@lru_cache(maxsize=1)
def experiment_layout() -> SystemLayout:
    """The canonical five-qubit layout (A_I, A_O, B_it, B_ot, B_oc)."""
    return qubits(*WIRE_LABELS)


@lru_cache(maxsize=1)
def _span_projectors() -> dict:
    layout = experiment_layout()
    slots = [SlotSpec(("A_I",), ("A_O",))]
    return {
        which: span_projector(layout, slots, ("B_it",), ("B_ot", "B_oc"), which)
        for which in (
            ConeId.UNIFORM_GLOBAL_INPUT,
            ConeId.FORWARD_SPAN,
            ConeId.BACKWARD_SPAN,
        )
    }


def _require_experiment_layout(layout: SystemLayout, what: str) -> None:
    if tuple(layout.labels) != WIRE_LABELS or tuple(layout.dims) != (2,) * 5:
        raise ValueError(
            f"{what} must live on the five-qubit layout {WIRE_LABELS}, "
            f"got {tuple(layout.labels)} with dims {tuple(layout.dims)}"
        )


# -- domain types ----------------------------------------------------------------


@dataclass(frozen=True)
class DecompositionTerm:
    """One product-projector term of a witness expansion.

    Five indices (a, b, c, d, e) name states from STATE_KETS for the wires
    (B_it, A_I, A_O, B_ot, B_oc); three indices (b, c, e) name the restricted
    family with B_it pinned to |0> and B_ot traced out.
    """

    indices: tuple[int, ...]
    coeff: float

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) not in (5, 3):
            raise ValueError(f"expected 5 (full) or 3 (restricted) indices, got {len(idx)}")
        if any(i < 0 or i > 3 for i in idx):
            raise ValueError(f"state indices must lie in 0..3, got {idx}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "coeff", float(self.coeff))

    @property
    def restricted(self) -> bool:
        return len(self.indices) == 3


@dataclass(frozen=True)
class ProbabilityRecord:
    """An event probability, optionally backed by raw counts."""

    indices: tuple[int, ...]
    probability: float
    counts: int | None = None
    shots: int | None = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) not in (5, 3):
            raise ValueError(f"expected 5 (full) or 3 (restricted) indices, got {len(idx)}")
        if any(i < 0 or i > 3 for i in idx):
            raise ValueError(f"state indices must lie in 0..3, got {idx}")
        p = float(self.probability)
        if p < -PROBABILITY_TOL or p > 1.0 + PROBABILITY_TOL:
            raise ValueError(f"probability {p!r} outside [0, 1]")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "probability", min(max(p, 0.0), 1.0))
        if self.counts is not None:
            if self.shots is None:
                raise ValueError("counts need an accompanying shot number")
            if int(self.counts) < 0:
                raise ValueError(f"counts must be nonnegative, got {self.counts}")
            object.__setattr__(self, "counts", int(self.counts))
        if self.shots is not None:
            if int(self.shots) <= 0:
                raise ValueError(f"shots must be positive, got {self.shots}")
            object.__setattr__(self, "shots", int(self.shots))


def certificate_residuals(
    op: HermitianOperator, certificate: Sequence[HermitianOperator]
) -> dict[str, float]:
    """Residuals of the defining identities of a witness certificate.

    A certificate (W0, W1, W2, W3) must satisfy W = W0 + W1 with W0
    orthogonal to the uniform-global-input span, W1 - W2 and W1 - W3 PSD,
    and W2, W3 orthogonal to the forward and backward spans respectively.
    """
    w0, w1, w2, w3 = certificate
    pro = _span_projectors()
    return {
        "identity": float(np.linalg.norm(op.matrix - w0.matrix - w1.matrix)),
        "uniform-membership": float(
            np.linalg.norm(pro[ConeId.UNIFORM_GLOBAL_INPUT](w0.matrix))
        ),
        "forward-membership": float(np.linalg.norm(pro[ConeId.FORWARD_SPAN](w2.matrix))),
        "backward-membership": float(np.linalg.norm(pro[ConeId.BACKWARD_SPAN](w3.matrix))),
        "forward-psd": max(0.0, -min_eigenvalue(w1 - w2)),
        "backward-psd": max(0.0, -min_eigenvalue(w1 - w3)),
    }


@dataclass(frozen=True)
class Witness:
    """A candidate witness operator, optionally with its validity certificate."""

    op: HermitianOperator
    certificate: tuple[HermitianOperator, ...] | None = None

    def __post_init__(self):
        _require_experiment_layout(self.op.layout, "a witness")
        if self.certificate is not None:
            cert = tuple(self.certificate)
            if len(cert) != 4:
                raise ValueError(f"certificate must be a (W0, W1, W2, W3) tuple, got {len(cert)} parts")
            object.__setattr__(self, "certificate", cert)
            bad = {
                name: res
                for name, res in certificate_residuals(self.op, cert).items()
                if res > CERTIFICATE_TOL
            }
            if bad:
                raise ValueError(f"certificate fails its defining identities: {bad}")


@dataclass(frozen=True)
class WitnessReport:
    """Outcome of witness validation."""

    valid: bool
    min_definite_value: float
    attained_definite_value: float
    certificate_ok: bool
    certificate: tuple[HermitianOperator, ...] | None
    residuals: Mapping[str, float]
    tol: float

    def as_dict(self) -> dict:
        return {
            "valid": bool(self.valid),
            "min_definite_value": float(self.min_definite_value),
            "attained_definite_value": float(self.attained_definite_value),
            "certificate_ok": bool(self.certificate_ok),
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "tol": float(self.tol),
        }


def _as_witness(w: Witness | HermitianOperator) -> Witness:
    return w if isinstance(w, Witness) else Witness(op=w)


# -- validation ------------------------------------------------------------------


def _build_certificate(
    op: HermitianOperator, tol: float, max_iter: int
) -> tuple[tuple[HermitianOperator, ...], SolveReport]:
    """Split op into certificate parts by a conic feasibility solve."""
    pro = _span_projectors()
    p_uni = pro[ConeId.UNIFORM_GLOBAL_INPUT]
    p_fwd = pro[ConeId.FORWARD_SPAN]
    p_bwd = pro[ConeId.BACKWARD_SPAN]
    layout = op.layout
    prog = ConicProgram(
        name="certificate-feasibility",
        pair_tag="witness-certificate",
        n=layout.total_dim,
        blocks=(
            Block("uniform-part", "sub", lambda m: m - p_uni(m)),
            Block("forward-part", "sub", lambda m: m - p_fwd(m)),
            Block("backward-part", "sub", lambda m: m - p_bwd(m)),
            Block("forward-slack", "psd"),
            Block("backward-slack", "psd"),
        ),
        matrix_rows=(
            MatrixRow(
                "forward-split",
                {"uniform-part": 1.0, "forward-part": 1.0, "forward-slack": 1.0},
                op.matrix,
            ),
            MatrixRow(
                "backward-split",
                {"uniform-part": 1.0, "backward-part": 1.0, "backward-slack": 1.0},
                op.matrix,
            ),
        ),
        scalar_rows=(),
        objective={},
        principal="uniform-part",
        layout=layout,
    )
    report = solve(prog, tol=tol, max_iter=max_iter)
    sol = report.extras["solution"]
    w0 = sol["uniform-part"] - p_uni(sol["uniform-part"])
    w2 = sol["forward-part"] - p_fwd(sol["forward-part"])
    w3 = sol["backward-part"] - p_bwd(sol["backward-part"])
    w1 = op.matrix - w0
    certificate = tuple(HermitianOperator(layout, m) for m in (w0, w1, w2, w3))
    return certificate, report


def validate_witness(w: Witness | HermitianOperator, tol: float = GAP_TOL) -> WitnessReport:
    """Check witness validity against the definite-direction cone.

    Certifies a lower bound on min Tr(W S') over trace-normalized definite
    setups S' (validity means the bound is >= -tol), and constructs the
    splitting certificate by a feasibility solve when one is not already
    attached to the witness.
    """
    wit = _as_witness(w)
    pro = _span_projectors()
    spans = {
        "forward": pro[ConeId.FORWARD_SPAN],
        "backward": pro[ConeId.BACKWARD_SPAN],
    }
    floor = solve_cone_value(
        -wit.op.matrix,
        wit.op.layout,
        spans,
        trace_target=4.0,
        gap_tol=max(tol / 2.0, 1e-6),
        pair_tag="definite-floor",
    )
    min_value = -floor.primal_value
    attained = -floor.dual_value
    valid = bool(floor.converged and min_value >= -tol)
    residuals: dict[str, float] = {"definite-floor-gap": float(floor.gap)}

    certificate = wit.certificate
    certificate_ok = False
    if certificate is not None:
        residuals.update(certificate_residuals(wit.op, certificate))
        certificate_ok = True
    elif valid:
        certificate, feas = _build_certificate(wit.op, tol=1e-9, max_iter=MAX_ITER)
        cert_res = certificate_residuals(wit.op, certificate)
        residuals.update(cert_res)
        residuals["certificate-split"] = max(
            feas.residuals["split:primal"], feas.residuals["split:dual"]
        )
        certificate_ok = all(res <= CERTIFICATE_TOL for res in cert_res.values())
        if not certificate_ok:
            certificate = None
    return WitnessReport(
        valid=valid,
        min_definite_value=float(min_value),
        attained_definite_value=float(attained),
        certificate_ok=certificate_ok,
        certificate=certificate,
        residuals=residuals,
        tol=float(tol),
    )


# -- decomposition ---------------------------------------------------------------


def term_operator(indices: Sequence[int]) -> np.ndarray:
    """The product operator of one decomposition term, on the full layout.

    Full terms place (in layout order A_I, A_O, B_it, B_ot, B_oc) the
    projectors P_b, conj(P_c), conj(P_a), P_d, P_e; the conjugations are what
    remains of the global transpose once it is distributed over the factors.
    Restricted terms pin B_it to |0><0| and put the identity on B_ot.
    """
    idx = tuple(int(i) for i in indices)
    if len(idx) == 5:
        a, b, c, d, e = idx
        factors = (
            _PROJECTORS[b],
            _CONJ_PROJECTORS[c],
            _CONJ_PROJECTORS[a],
            _PROJECTORS[d],
            _PROJECTORS[e],
        )
    elif len(idx) == 3:
        b, c, e = idx
        factors = (_PROJECTORS[b], _CONJ_PROJECTORS[c], _PROJECTORS[0], _I2, _PROJECTORS[e])
    else:
        raise ValueError(f"expected 5 or 3 indices, got {len(idx)}")
    out = factors[0]
    for factor in factors[1:]:
        out = np.kron(out, factor)
    return out


@lru_cache(maxsize=1)
def _single_gram() -> np.ndarray:
    gram = np.empty((4, 4))
    for i, pi in enumerate(_PROJECTORS):
        for j, pj in enumerate(_PROJECTORS):
            gram[i, j] = np.real(np.trace(pi @ pj))
    return gram


@lru_cache(maxsize=2)
def _design(restricted: bool):
    """Term list, stacked basis operators, and the Cholesky-factored Gram."""
    arity = 3 if restricted else 5
    index_list = list(product(range(4), repeat=arity))
    basis = np.stack([term_operator(idx) for idx in index_list])
    gram = _single_gram()
    for _ in range(arity - 1):
        gram = np.kron(gram, _single_gram())
    if restricted:
        # the pinned B_it projector contributes trace 1, the B_ot identity trace 2
        gram = 2.0 * gram
    positions = {idx: k for k, idx in enumerate(index_list)}
    return index_list, basis, cho_factor(gram), positions


def decompose_witness(
    w: Witness | HermitianOperator, restricted: bool = False
) -> list[DecompositionTerm]:
    """Expand a witness over the product basis of experiment settings.

    Solves the Gram system of the (informationally complete) projector
    products; coefficients smaller than ZERO_COEFF_TOL are reported as exact
    zeros.  In restricted mode the basis only spans operators of the pinned
    B_it / traced B_ot form, and an operator outside that span is rejected.
    """
    wit = _as_witness(w)
    mat = wit.op.matrix
    index_list, basis, gram_factor, _ = _design(bool(restricted))
    pairings = np.real(np.einsum("tij,ji->t", basis, mat))
    coeffs = cho_solve(gram_factor, pairings)
    coeffs[np.abs(coeffs) < ZERO_COEFF_TOL] = 0.0
    rebuilt = np.einsum("t,tij->ij", coeffs, basis)
    residual = float(np.linalg.norm(mat - rebuilt))
    if residual > RECONSTRUCTION_TOL:
        if restricted:
            raise ValueError(
                "witness does not match the restricted product structure "
                f"(|0><0| on B_it, identity on B_ot): residual {residual:.3e}"
            )
        raise ValueError(f"decomposition failed to reconstruct the witness: residual {residual:.3e}")
    return [DecompositionTerm(idx, c) for idx, c in zip(index_list, coeffs)]


# -- Born probabilities and estimation --------------------------------------------


def born_probabilities(
    s: SetupOperator, terms: Sequence[DecompositionTerm]
) -> list[ProbabilityRecord]:
    """Event probabilities of the decomposition settings on a setup.

    Each probability is the pairing of the setup operator with the term's
    product operator (the transposed preparation-and-measurement projector).
    """
    _require_experiment_layout(s.op.layout, "the setup")
    mat = s.op.matrix
    records = []
    for term in terms:
        _, basis, _, positions = _design(term.restricted)
        p = float(np.real(np.einsum("ij,ji->", basis[positions[term.indices]], mat)))
        records.append(ProbabilityRecord(term.indices, p))
    return records


def _aligned_contributions(
    terms: Sequence[DecompositionTerm], probs: Sequence[ProbabilityRecord]
) -> tuple[np.ndarray, np.ndarray]:
    table = {record.indices: record.probability for record in probs}
    coeffs = []
    values = []
    for term in terms:
        if term.coeff == 0.0:
            continue
        if term.indices not in table:
            raise ValueError(f"missing probability for contributing term {term.indices}")
        coeffs.append(term.coeff)
        values.append(table[term.indices])
    return np.asarray(coeffs, dtype=float), np.asarray(values, dtype=float)


def estimate_robustness(
    terms: Sequence[DecompositionTerm], probs: Sequence[ProbabilityRecord]
) -> float:
    """Robustness estimate -sum(p * coeff) over the contributing terms."""
    coeffs, values = _aligned_contributions(terms, probs)
    return float(-(values @ coeffs))


def poisson_resample(
    terms: Sequence[DecompositionTerm],
    probs: Sequence[ProbabilityRecord],
    shots: int,
    repetitions: int = 100,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo spread of the robustness estimate under Poisson counts.

    Each repetition draws counts with mean shots*p for every contributing
    term, recomputes the estimate from the resampled frequencies, and the
    sample mean and standard deviation over repetitions are returned.
    Deterministic per seed; repetitions use independently spawned generators.
    """
    if int(shots) <= 0:
        raise ValueError(f"shots must be positive, got {shots}")
    if int(repetitions) < 2:
        raise ValueError(f"need at least two repetitions for a spread, got {repetitions}")
    coeffs, values = _aligned_contributions(terms, probs)
    expected = values * float(shots)
    estimates = np.empty(int(repetitions))
    for rep in range(int(repetitions)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))
        frequencies = rng.poisson(expected) / float(shots)
        estimates[rep] = -(frequencies @ coeffs)
    return float(np.mean(estimates)), float(np.std(estimates, ddof=1))


def z_score(value: float, sigma: float) -> float:
    """Significance of a value against its standard deviation, in exact
    decimal arithmetic so published figures reproduce without float drift."""
    spread = Fraction(str(sigma))
    if spread <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return float(Fraction(str(value)) / spread)


# -- CSV interfaces ----------------------------------------------------------------


_FULL_COLUMNS = ("a", "b", "c", "d", "e")
_RESTRICTED_COLUMNS = ("b", "c", "e")


def _index_columns(arity: int) -> tuple[str, ...]:
    return _FULL_COLUMNS if arity == 5 else _RESTRICTED_COLUMNS


def _uniform_arity(items, what: str) -> int:
    arities = {len(item.indices) for item in items}
    if len(arities) > 1:
        raise ValueError(f"{what} mix full and restricted index tuples")
    return arities.pop() if arities else 5


def save_decomposition(path: str, terms: Sequence[DecompositionTerm]) -> None:
    """Write contributing terms as CSV; exact-zero coefficients are omitted."""
    terms = list(terms)
    arity = _uniform_arity(terms, "decomposition terms")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_index_columns(arity) + ("coeff",))
    for term in terms:
        if term.coeff != 0.0:
            writer.writerow(term.indices + (repr(term.coeff),))
    atomic_write_text(path, buf.getvalue())


def load_decomposition(path: str) -> list[DecompositionTerm]:
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ValueError(f"empty decomposition file {path}")
    header = tuple(rows[0])
    for columns in (_FULL_COLUMNS, _RESTRICTED_COLUMNS):
        if header == columns + ("coeff",):
            arity = len(columns)
            break
    else:
        raise ValueError(f"unrecognized decomposition header {header}")
    return [
        DecompositionTerm(tuple(int(v) for v in row[:arity]), float(row[arity]))
        for row in rows[1:]
        if row
    ]


def save_probabilities(path: str, records: Sequence[ProbabilityRecord]) -> None:
    """Write probability records as CSV, with counts columns when present."""
    records = list(records)
    arity = _uniform_arity(records, "probability records")
    with_counts = any(record.counts is not None for record in records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = _index_columns(arity) + ("probability",)
    if with_counts:
        header += ("counts", "shots")
    writer.writerow(header)
    for record in records:
        row = record.indices + (repr(record.probability),)
        if with_counts:
            row += (
                "" if record.counts is None else record.counts,
                "" if record.shots is None else record.shots,
            )
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def load_probabilities(path: str) -> list[ProbabilityRecord]:
    """Read probability records; raw-count rows (counts, shots and no
    probability column) are converted to frequencies."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ValueError(f"empty probability file {path}")
    header = tuple(rows[0])
    for columns in (_FULL_COLUMNS, _RESTRICTED_COLUMNS):
        if header[: len(columns)] == columns:
            arity = len(columns)
            break
    else:
        raise ValueError(f"unrecognized probability header {header}")
    value_columns = header[arity:]
    records = []
    for row in rows[1:]:
        if not row:
            continue
        indices = tuple(int(v) for v in row[:arity])
        fields = dict(zip(value_columns, row[arity:]))
        counts = int(fields["counts"]) if fields.get("counts") else None
        shots = int(fields["shots"]) if fields.get("shots") else None
        if "probability" in fields:
            probability = float(fields["probability"])
        elif counts is not None and shots is not None:
            probability = counts / shots
        else:
            raise ValueError(
                f"row {indices} in {path} has neither a probability nor counts with shots"
            )
        records.append(ProbabilityRecord(indices, probability, counts=counts, shots=shots))
    return records
