"""Setup operators: processes that use a device in the forward direction, the
backward direction, or a coherent combination of both.

A setup is a Hermitian operator over a labeled layout whose wires carry one of
four roles: the pair handed to the device (slot input / slot output) and the
pair facing the rest of the world (global input / global output).  Validity is
expressed through signed sums of trace-and-replace maps; every such bracket is
an orthogonal projector and the setup must lie in its kernel.  The same
bracket machinery produces the subspace projectors used by the conic solver,
the single-slot and multi-slot membership reports, the coherently controlled
direction-flip setup, and supermap application via the link contraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from math import prod, sqrt
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .channels import KrausChannel, kraus_to_choi
from .tensor_core import (
    HermitianOperator,
    SystemLayout,
    atomic_write_text,
    basis_ket,
    double_ket,
    identity,
    min_eigenvalue,
    operator_from_dict,
    operator_to_dict,
    partial_trace_matrix,
    partial_transpose,
    permute_factors,
    qubits,
    relabel,
    split_factor,
    tensor_product,
    trace_and_replace,
    trace_and_replace_matrix,
)

# Absolute tolerance for linear-condition residuals on trace-normalized setups.
MEMBERSHIP_TOL = 1e-9

ROLE_SLOT_INPUT = "slot-input"
ROLE_SLOT_OUTPUT = "slot-output"
ROLE_GLOBAL_INPUT = "global-input"
ROLE_GLOBAL_OUTPUT = "global-output"
ROLES = (ROLE_SLOT_INPUT, ROLE_SLOT_OUTPUT, ROLE_GLOBAL_INPUT, ROLE_GLOBAL_OUTPUT)


class ConeId(Enum):
    """Cones of setup operators, plus the linear spans that cut them out."""

    FORWARD = "forward"
    BACKWARD = "backward"
    DEFINITE = "definite"
    GENERAL = "general"
    # linear subspaces (membership is a residual test, no positivity involved)
    UNIFORM_GLOBAL_INPUT = "uniform-global-input"
    GENERAL_SPAN = "general-span"
    FORWARD_SPAN = "forward-span"
    BACKWARD_SPAN = "backward-span"


@dataclass(frozen=True)
class SlotSpec:
    """One device slot: the wire groups plugged to the device input and output."""

    input: tuple[str, ...]
    output: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "input", tuple(str(l) for l in self.input))
        object.__setattr__(self, "output", tuple(str(l) for l in self.output))

    @property
    def labels(self) -> tuple[str, ...]:
        return self.input + self.output


@dataclass(frozen=True)
class SetupOperator:
    """A Hermitian operator whose layout labels are tagged with wire roles."""

    op: HermitianOperator
    roles: Mapping[str, str]

    def __post_init__(self):
        roles = {str(k): str(v) for k, v in dict(self.roles).items()}
        layout_labels = set(self.op.layout.labels)
        if set(roles) != layout_labels:
            raise ValueError(
                f"roles must cover the layout labels exactly: got {sorted(roles)}, layout has {sorted(layout_labels)}"
            )
        bad = sorted(lab for lab, role in roles.items() if role not in ROLES)
        if bad:
            raise ValueError(f"unknown role for labels {bad}; valid roles are {ROLES}")
        for role in ROLES:
            if role not in roles.values():
                raise ValueError(f"no factor carries role {role!r}")
        object.__setattr__(self, "roles", roles)
        if self.slot_input_dim != self.slot_output_dim:
            raise ValueError(
                f"slot input dimension {self.slot_input_dim} != slot output dimension {self.slot_output_dim}"
            )

    def labels(self, role: str) -> tuple[str, ...]:
        """Labels carrying the given role, in layout order."""
        return tuple(lab for lab in self.op.layout.labels if self.roles[lab] == role)

    def role_dim(self, role: str) -> int:
        return prod(self.op.layout.dim(lab) for lab in self.labels(role))

    @property
    def slot_input_dim(self) -> int:
        return self.role_dim(ROLE_SLOT_INPUT)

    @property
    def slot_output_dim(self) -> int:
        return self.role_dim(ROLE_SLOT_OUTPUT)

    @property
    def global_input_dim(self) -> int:
        return self.role_dim(ROLE_GLOBAL_INPUT)

    @property
    def trace_target(self) -> float:
        """Trace normalization of a valid setup: d_slot * d_global_input."""
        return float(self.slot_input_dim * self.global_input_dim)

    def slot(self) -> SlotSpec:
        return SlotSpec(self.labels(ROLE_SLOT_INPUT), self.labels(ROLE_SLOT_OUTPUT))


# -- signed trace-and-replace brackets -----------------------------------------
#
# A bracket is the expansion of  prod_g (id - t_g) . t_always  into signed
# trace-and-replace terms, where t_X replaces the factors in X by normalized
# identities.  All t_X commute, so each bracket is an orthogonal projector;
# a linear validity condition says the setup lies in its kernel.

_Bracket = list[tuple[int, frozenset]]


def _group_dim(layout: SystemLayout, labels: Iterable[str]) -> int:
    return prod(layout.dim(lab) for lab in labels)


def _bracket(layout: SystemLayout, ones: Sequence[Iterable[str]], always: Iterable[str]) -> _Bracket:
    """Expand the bracket; an empty list means the zero map (vacuous condition).

    A group of total dimension one makes its (id - t_g) factor vanish, since
    replacing a one-dimensional factor does nothing.
    """
    terms: _Bracket = [(1, frozenset(always))]
    for group in ones:
        group = frozenset(group)
        if _group_dim(layout, group) == 1:
            return []
        terms = terms + [(-sign, labels | group) for sign, labels in terms]
    return terms


def _eval_bracket(mat: np.ndarray, layout: SystemLayout, terms: _Bracket) -> np.ndarray:
    out = np.zeros(mat.shape, dtype=complex)
    for sign, labels in terms:
        out += sign * trace_and_replace_matrix(mat, layout.dims, layout.positions(labels))
    return out


def _uniform_bracket(
    layout: SystemLayout,
    slots: Sequence[SlotSpec],
    global_in: Sequence[str],
    global_out: Sequence[str],
) -> list[tuple[str, _Bracket]]:
    """The uniform-global-input condition: replacing everything but the global
    input must equal replacing everything."""
    rest = {lab for s in slots for lab in s.labels} | set(global_out)
    terms = _bracket(layout, [tuple(global_in)], rest)
    return [("uniform-global-input", terms)] if terms else []


def _subset_brackets(
    layout: SystemLayout,
    slots: Sequence[SlotSpec],
    global_out: Sequence[str],
    direction: ConeId,
) -> list[tuple[str, _Bracket]]:
    """One condition per non-empty subset of slots.

    GENERAL removes both wires of every chosen slot; FORWARD removes only the
    device-output wires and BACKWARD only the device-input wires (strictly
    stronger conditions, pinning the direction).  Slots outside the subset are
    traced and replaced together with the global output.
    """
    out: list[tuple[str, _Bracket]] = []
    for r in range(1, len(slots) + 1):
        for chosen in combinations(range(len(slots)), r):
            always = set(global_out)
            for k in range(len(slots)):
                if k not in chosen:
                    always |= set(slots[k].labels)
            if direction is ConeId.GENERAL:
                ones = [slots[k].input for k in chosen] + [slots[k].output for k in chosen]
                key = "normalization"
            elif direction is ConeId.FORWARD:
                ones = [slots[k].output for k in chosen]
                key = "forward"
            elif direction is ConeId.BACKWARD:
                ones = [slots[k].input for k in chosen]
                key = "backward"
            else:
                raise ValueError(f"no per-slot condition set for {direction}")
            terms = _bracket(layout, ones, always)
            if terms:
                ids = ",".join(str(k + 1) for k in chosen)
                out.append((f"{key}[{ids}]", terms))
    return out


def _span_conditions(
    layout: SystemLayout,
    slots: Sequence[SlotSpec],
    global_in: Sequence[str],
    global_out: Sequence[str],
    which: ConeId,
) -> list[tuple[str, _Bracket]]:
    uniform = _uniform_bracket(layout, slots, global_in, global_out)
    if which is ConeId.UNIFORM_GLOBAL_INPUT:
        return uniform
    if which is ConeId.GENERAL_SPAN:
        return _subset_brackets(layout, slots, global_out, ConeId.GENERAL)
    if which is ConeId.FORWARD_SPAN:
        return _subset_brackets(layout, slots, global_out, ConeId.FORWARD)
    if which is ConeId.BACKWARD_SPAN:
        return _subset_brackets(layout, slots, global_out, ConeId.BACKWARD)
    if which in (ConeId.GENERAL, ConeId.FORWARD, ConeId.BACKWARD):
        conds = uniform + _subset_brackets(layout, slots, global_out, ConeId.GENERAL)
        if which is not ConeId.GENERAL:
            conds += _subset_brackets(layout, slots, global_out, which)
        return conds
    raise ValueError(f"{which} does not name a linear span")


def span_projector(
    layout: SystemLayout,
    slots: Sequence[SlotSpec],
    global_in: Sequence[str],
    global_out: Sequence[str],
    which: ConeId,
) -> Callable[[np.ndarray], np.ndarray]:
    """Orthogonal projector, as a raw-matrix callable, onto the named span.

    Cone ids stand for the affine span of the cone (positivity and trace
    normalization are not linear conditions and are checked elsewhere).
    """
    conds = _span_conditions(layout, slots, global_in, global_out, which)

    def project(mat: np.ndarray) -> np.ndarray:
        out = np.array(mat, dtype=complex)
        for _, terms in conds:
            out -= _eval_bracket(out, layout, terms)
        return out

    return project


def setup_span_projector(setup: SetupOperator, which: ConeId) -> Callable[[np.ndarray], np.ndarray]:
    """Single-slot span projector derived from the setup's role tags."""
    return span_projector(
        setup.op.layout,
        [setup.slot()],
        setup.labels(ROLE_GLOBAL_INPUT),
        setup.labels(ROLE_GLOBAL_OUTPUT),
        which,
    )


def subspace_project(setup: SetupOperator, which: ConeId) -> HermitianOperator:
    """Project the setup operator onto the named span; membership holds when
    the projection leaves it unchanged (Hilbert-Schmidt residual below tol)."""
    mat = setup_span_projector(setup, which)(setup.op.matrix)
    return HermitianOperator(setup.op.layout, mat)


# -- membership reports ---------------------------------------------------------


@dataclass(frozen=True)
class SetupReport:
    """Residuals of every linear condition, plus positivity and trace data."""

    cone: ConeId
    trace: float
    trace_target: float
    min_eigenvalue: float
    residuals: dict[str, float]
    tol: float
    passed: bool


def check_setup(setup: SetupOperator, cone: ConeId, tol: float = MEMBERSHIP_TOL) -> SetupReport:
    """Test membership of a single-slot setup in the named cone.

    GENERAL checks the uniform-global-input and normalization conditions plus
    positivity and the trace value; FORWARD / BACKWARD add the corresponding
    stricter per-slot conditions.  DEFINITE (a convex hull, not an
    intersection) cannot be certified by residuals and is handled by the
    robustness programs in the sdp module.
    """
    if cone is ConeId.DEFINITE:
        raise ValueError(
            "membership in the definite-direction cone is a conic decomposition "
            "problem; use the sdp module's robustness programs"
        )
    if cone not in (ConeId.FORWARD, ConeId.BACKWARD, ConeId.GENERAL):
        raise ValueError(f"check_setup expects a cone id, got {cone}; use subspace_project for spans")
    layout = setup.op.layout
    conds = _span_conditions(
        layout, [setup.slot()], setup.labels(ROLE_GLOBAL_INPUT), setup.labels(ROLE_GLOBAL_OUTPUT), cone
    )
    mat = setup.op.matrix
    residuals = {name: float(np.linalg.norm(_eval_bracket(mat, layout, terms))) for name, terms in conds}
    trace = setup.op.trace
    target = setup.trace_target
    min_eig = min_eigenvalue(setup.op)
    passed = (
        all(r <= tol for r in residuals.values())
        and min_eig >= -tol
        and abs(trace - target) <= tol * max(1.0, abs(target))
    )
    return SetupReport(cone, trace, target, min_eig, residuals, tol, passed)


@dataclass(frozen=True)
class MultipartiteReport:
    """Like SetupReport, for several slots: the general condition set plus the
    stricter all-forward and all-backward sets, reported side by side."""

    trace: float
    trace_target: float
    min_eigenvalue: float
    residuals: dict[str, dict[str, float]]
    tol: float
    passed: dict[str, bool]


def check_multipartite(
    op: HermitianOperator,
    slots: Sequence[SlotSpec],
    global_in: Sequence[str] = (),
    global_out: Sequence[str] = (),
    tol: float = MEMBERSHIP_TOL,
) -> MultipartiteReport:
    """Validity report for a setup with N device slots.

    The general set imposes, for every non-empty subset of slots, the bracket
    that removes both wires of the chosen slots; "forward" and "backward" are
    the stricter single-direction sets (their residuals come on top of the
    general ones).  Dimension-one wire groups make conditions vacuous, so a
    trivial global input is simply omitted.
    """
    layout = op.layout
    slots = [s if isinstance(s, SlotSpec) else SlotSpec(*s) for s in slots]
    claimed: list[str] = [lab for s in slots for lab in s.labels]
    claimed += list(global_in) + list(global_out)
    if sorted(claimed) != sorted(layout.labels):
        raise ValueError(
            f"slots and global wires must partition the layout labels: got {sorted(claimed)}, "
            f"layout has {sorted(layout.labels)}"
        )
    for k, s in enumerate(slots):
        if _group_dim(layout, s.input) != _group_dim(layout, s.output):
            raise ValueError(f"slot {k + 1} input and output dimensions differ")

    mat = op.matrix

    def residual_map(conds: list[tuple[str, _Bracket]]) -> dict[str, float]:
        return {name: float(np.linalg.norm(_eval_bracket(mat, layout, terms))) for name, terms in conds}

    general = residual_map(
        _uniform_bracket(layout, slots, global_in, global_out)
        + _subset_brackets(layout, slots, global_out, ConeId.GENERAL)
    )
    forward = residual_map(_subset_brackets(layout, slots, global_out, ConeId.FORWARD))
    backward = residual_map(_subset_brackets(layout, slots, global_out, ConeId.BACKWARD))

    trace = op.trace
    target = float(_group_dim(layout, global_in) * prod(_group_dim(layout, s.input) for s in slots))
    min_eig = min_eigenvalue(op)
    ok_general = (
        all(r <= tol for r in general.values())
        and min_eig >= -tol
        and abs(trace - target) <= tol * max(1.0, abs(target))
    )
    passed = {
        "general": ok_general,
        "forward": ok_general and all(r <= tol for r in forward.values()),
        "backward": ok_general and all(r <= tol for r in backward.values()),
    }
    residuals = {"general": general, "forward": forward, "backward": backward}
    return MultipartiteReport(trace, target, min_eig, residuals, tol, passed)


# -- the coherently controlled direction flip -----------------------------------

_I2 = np.eye(2)


def qtf_choi() -> SetupOperator:
    """Choi operator of the controlled direction flip with explicit control wires.

    Rank-one on six qubits (slot input, slot output, global target/control
    inputs, global target/control outputs): the control state selects whether
    the device acts forward or transposed, and superpositions of the two
    control basis states probe both directions coherently.  Trace 8.
    """
    order = ("A_I", "A_O", "B_it", "B_ic", "B_ot", "B_oc")
    fwd = tensor_product(
        [
            double_ket(_I2, ("A_I", "B_it")),
            double_ket(_I2, ("A_O", "B_ot")),
            basis_ket(qubits("B_ic"), 0),
            basis_ket(qubits("B_oc"), 0),
        ]
    )
    bwd = tensor_product(
        [
            double_ket(_I2, ("A_O", "B_it")),
            double_ket(_I2, ("A_I", "B_ot")),
            basis_ket(qubits("B_ic"), 1),
            basis_ket(qubits("B_oc"), 1),
        ]
    )
    v = permute_factors(fwd, order) + permute_factors(bwd, order)
    roles = {
        "A_I": ROLE_SLOT_INPUT,
        "A_O": ROLE_SLOT_OUTPUT,
        "B_it": ROLE_GLOBAL_INPUT,
        "B_ic": ROLE_GLOBAL_INPUT,
        "B_ot": ROLE_GLOBAL_OUTPUT,
        "B_oc": ROLE_GLOBAL_OUTPUT,
    }
    return SetupOperator(v.outer(), roles)


def qtf_plus_control() -> SetupOperator:
    """The direction flip with the control input fixed in the balanced
    superposition and the control output kept as a global output wire.

    Rank-one on five qubits (A_I, A_O, B_it, B_ot, B_oc), trace 4.  This is
    the setup whose distance from the definite-direction cone the robustness
    programs measure.
    """
    order = ("A_I", "A_O", "B_it", "B_ot", "B_oc")
    fwd = tensor_product(
        [
            double_ket(_I2, ("A_I", "B_it")),
            double_ket(_I2, ("A_O", "B_ot")),
            basis_ket(qubits("B_oc"), 0),
        ]
    )
    bwd = tensor_product(
        [
            double_ket(_I2, ("A_O", "B_it")),
            double_ket(_I2, ("A_I", "B_ot")),
            basis_ket(qubits("B_oc"), 1),
        ]
    )
    v = (permute_factors(fwd, order) + permute_factors(bwd, order)) * (1 / sqrt(2))
    roles = {
        "A_I": ROLE_SLOT_INPUT,
        "A_O": ROLE_SLOT_OUTPUT,
        "B_it": ROLE_GLOBAL_INPUT,
        "B_ot": ROLE_GLOBAL_OUTPUT,
        "B_oc": ROLE_GLOBAL_OUTPUT,
    }
    return SetupOperator(v.outer(), roles)


# -- supermap application --------------------------------------------------------


def link_product(a: HermitianOperator, b: HermitianOperator, over: Iterable[str]) -> HermitianOperator:
    """Contract two operators over shared labels: Tr_over[(A^T_over x I)(I x B)].

    The partial transpose sits on the contracted factors of the first operand;
    the result lives on the union of the remaining factors (first operand's
    extras first, then the second operand's order).
    """
    over = set(over)
    a_labels, b_labels = set(a.layout.labels), set(b.layout.labels)
    missing = over - (a_labels & b_labels)
    if missing:
        raise ValueError(f"contraction labels {sorted(missing)} are not shared by both operands")
    leftover = (a_labels & b_labels) - over
    if leftover:
        raise ValueError(f"labels {sorted(leftover)} appear on both sides but are not contracted")
    for lab in over:
        if a.layout.dim(lab) != b.layout.dim(lab):
            raise ValueError(f"dimension mismatch on contracted label {lab!r}")
    a_only = tuple(f for f in a.layout.factors if f[0] not in over)
    union = SystemLayout(a_only + b.layout.factors)
    order = union.labels

    a_pad = tuple(f for f in b.layout.factors if f[0] not in a_labels)
    a_full = a if not a_pad else tensor_product([a, identity(SystemLayout(a_pad))])
    a_full = permute_factors(a_full, order)
    b_full = b if not a_only else tensor_product([b, identity(SystemLayout(a_only))])
    b_full = permute_factors(b_full, order)

    raw = partial_transpose(a_full, over).matrix @ b_full.matrix
    traced = partial_trace_matrix(raw, union.dims, union.positions(over))
    kept = SystemLayout(tuple(f for f in union.factors if f[0] not in over))
    return HermitianOperator(kept, traced)


def apply_supermap(setup: SetupOperator, choi: HermitianOperator) -> HermitianOperator:
    """Plug a device, given by its two-factor Choi operator (input, output),
    into the setup's slot; returns the Choi operator of the induced process on
    the global wires, in the setup's layout order.

    When the slot wires consist of several labels, the device's composite
    input/output indices must be ordered like those labels in the setup layout.
    """
    if len(choi.layout.factors) != 2:
        raise ValueError("device Choi operator must have exactly two factors (input, output)")
    (c_in, d_in), (c_out, d_out) = choi.layout.factors
    if d_in != setup.slot_input_dim or d_out != setup.slot_output_dim:
        raise ValueError(
            f"device dimensions ({d_in}, {d_out}) do not match the slot "
            f"({setup.slot_input_dim}, {setup.slot_output_dim})"
        )
    sin = setup.labels(ROLE_SLOT_INPUT)
    sout = setup.labels(ROLE_SLOT_OUTPUT)
    lifted = relabel(choi, {c_in: "slot:in", c_out: "slot:out"})
    lifted = split_factor(lifted, "slot:in", tuple((lab, setup.op.layout.dim(lab)) for lab in sin))
    lifted = split_factor(lifted, "slot:out", tuple((lab, setup.op.layout.dim(lab)) for lab in sout))
    return link_product(lifted, setup.op, over=set(sin) | set(sout))


def sequential_setup(
    pre: KrausChannel,
    post: KrausChannel,
    slot_dim: int,
    direction: ConeId = ConeId.FORWARD,
    labels: Sequence[str] = ("A_I", "A_O", "B_I", "B_O"),
) -> SetupOperator:
    """Fixed-direction setup routing the global input through `pre`, then the
    device slot, then `post`.

    `pre` maps the global input to (device wire x memory) and `post` maps
    (device wire x memory) to the global output; both composite wires are
    ordered (device, memory).  FORWARD feeds the device's input from `pre`;
    BACKWARD routes through the device in the opposite sense, feeding its
    output wire instead.
    """
    if direction not in (ConeId.FORWARD, ConeId.BACKWARD):
        raise ValueError(f"direction must be FORWARD or BACKWARD, got {direction}")
    slot_in, slot_out, g_in, g_out = labels
    if pre.out_dim % slot_dim:
        raise ValueError(f"pre output dimension {pre.out_dim} does not factor as device wire x memory")
    mem = pre.out_dim // slot_dim
    if post.in_dim != slot_dim * mem:
        raise ValueError(f"post input dimension {post.in_dim} != device wire x memory = {slot_dim * mem}")
    dev_first, dev_second = (slot_in, slot_out) if direction is ConeId.FORWARD else (slot_out, slot_in)

    c_pre = kraus_to_choi(pre, labels=(g_in, "stage:out"))
    c_pre = split_factor(c_pre, "stage:out", ((dev_first, slot_dim), ("memory", mem)))
    c_post = kraus_to_choi(post, labels=("stage:in", g_out))
    c_post = split_factor(c_post, "stage:in", ((dev_second, slot_dim), ("memory", mem)))

    s = link_product(c_pre, c_post, over={"memory"})
    s = permute_factors(s, (slot_in, slot_out, g_in, g_out))
    roles = {
        slot_in: ROLE_SLOT_INPUT,
        slot_out: ROLE_SLOT_OUTPUT,
        g_in: ROLE_GLOBAL_INPUT,
        g_out: ROLE_GLOBAL_OUTPUT,
    }
    return SetupOperator(s, roles)


# -- definite-direction splitting -------------------------------------------------


def definite_split(setup: SetupOperator) -> tuple[HermitianOperator, HermitianOperator]:
    """Split I + S into a forward and a backward part.

    Returns (I/2 + t_out(S), I/2 + S - t_out(S)) with t_out the
    trace-and-replace over the slot-output wires.  For S in the general span
    with uniform global input and Hilbert-Schmidt norm at most 1/2, both parts
    are positive semidefinite members of the forward / backward spans, so
    I + S decomposes over the definite-direction cone.
    """
    op = setup.op
    half = 0.5 * identity(op.layout)
    fwd_part = trace_and_replace(op, setup.labels(ROLE_SLOT_OUTPUT))
    return half + fwd_part, half + (op - fwd_part)


def random_span_element(
    setup: SetupOperator, rng: np.random.Generator, hs_norm: float = 0.5
) -> SetupOperator:
    """Random Hermitian element of general-span with uniform global input,
    scaled to the requested Hilbert-Schmidt norm (Gaussian entries, projected)."""
    n = setup.op.layout.total_dim
    project = setup_span_projector(setup, ConeId.GENERAL)
    while True:
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        mat = project((g + g.conj().T) / 2)
        scale = float(np.linalg.norm(mat))
        if scale > 1e-9:
            break
    op = HermitianOperator(setup.op.layout, mat * (hs_norm / scale))
    return SetupOperator(op, setup.roles)


# -- setup file format -------------------------------------------------------------


def setup_to_dict(setup: SetupOperator) -> dict:
    record = operator_to_dict(setup.op)
    record["roles"] = dict(setup.roles)
    return record


def setup_from_dict(obj: dict) -> SetupOperator:
    if "roles" not in obj:
        raise ValueError("setup record is missing the 'roles' mapping")
    return SetupOperator(operator_from_dict(obj), obj["roles"])


def save_setup(path: str, setup: SetupOperator) -> None:
    atomic_write_text(path, json.dumps(setup_to_dict(setup)))


def load_setup(path: str) -> SetupOperator:
    with open(path) as handle:
        return setup_from_dict(json.load(handle))
