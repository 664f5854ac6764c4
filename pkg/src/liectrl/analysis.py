"""Decision procedure for the identity control set of a linear system.

Each verdict is ``yes``, ``no`` or ``unknown`` and carries the rule that
produced it, a citation and the hypotheses it consumed. A rule only fires
when all of its hypotheses hold; otherwise the verdict stays ``unknown`` and
names what is missing.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .algebra import d_invariant_closure, subspace_sum
from .spectral import SpectralDecomposition
from .system import LinearSystemSpec

YES, NO, UNKNOWN = "yes", "no", "unknown"

CITATIONS = {
    "R1": "existence of a control set containing e in its interior (A open, 0 in int Omega)",
    "R2": "nilpotent G: C closed iff D has only eigenvalues with nonpositive real part",
    "R3": "nilpotent G: C open iff D has only eigenvalues with nonnegative real part",
    "R4": "nilpotent G: C = G iff D has only eigenvalues with zero real part",
    "R5": "controllability: nilpotent G with A open is controllable iff every eigenvalue of D has zero real part; sufficient for finite semisimple center",
    "R6": "simply connected nilpotent G: C bounded iff cl(A_{G-}), cl(A*_{G+}) compact and D hyperbolic",
    "R7": "C is the only control set when G is solvable or G0 is compact",
    "R8": "C closed iff A* = G; C open iff A = G",
}


class ClassificationError(RuntimeError):
    """Rule outcomes contradict each other."""


@dataclass
class Verdict:
    value: str = UNKNOWN
    rule: str = ""
    citation: str = ""
    hypotheses: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    note: str = ""

    @classmethod
    def fire(cls, rule: str, value: bool | str, hypotheses, note: str = "") -> "Verdict":
        if isinstance(value, bool):
            value = YES if value else NO
        return cls(value, rule, CITATIONS[rule], list(hypotheses), [], note)

    @classmethod
    def blocked(cls, rule: str, missing, hypotheses=(), note: str = "") -> "Verdict":
        return cls(UNKNOWN, rule, CITATIONS[rule], list(hypotheses), list(missing), note)

    @property
    def yes(self) -> bool:
        return self.value == YES

    @property
    def no(self) -> bool:
        return self.value == NO


@dataclass
class ClassificationReport:
    larc: bool
    a_open_assumed: bool
    hyperbolic: bool
    spectrum_signs: dict
    group: dict
    c_exists: Verdict
    c_open: Verdict
    c_closed: Verdict
    c_equals_G: Verdict
    controllable: Verdict
    c_bounded: Verdict
    c_unique: Verdict
    a_equals_G: Verdict
    a_star_equals_G: Verdict
    notes: list = field(default_factory=list)

    VERDICTS = (
        "c_exists",
        "controllable",
        "c_open",
        "c_closed",
        "c_equals_G",
        "c_bounded",
        "c_unique",
        "a_equals_G",
        "a_star_equals_G",
    )

    def verdicts(self) -> dict:
        return {name: getattr(self, name) for name in self.VERDICTS}

    def to_dict(self) -> dict:
        return {
            "larc": self.larc,
            "a_open_assumed": self.a_open_assumed,
            "hyperbolic": self.hyperbolic,
            "spectrum_signs": self.spectrum_signs,
            "group": self.group,
            "verdicts": {k: asdict(v) for k, v in self.verdicts().items()},
            "notes": list(self.notes),
        }

    def to_text(self) -> str:
        lines = [
            f"LARC: {'holds' if self.larc else 'fails'}",
            f"A open (assumed): {self.a_open_assumed}",
            f"D hyperbolic: {self.hyperbolic}",
        ]
        for name, v in self.verdicts().items():
            tag = f"[{v.rule}]" if v.rule else ""
            line = f"{name:16s} {v.value:8s} {tag}"
            if v.missing:
                line += f"  missing: {', '.join(v.missing)}"
            if v.note:
                line += f"  ({v.note})"
            lines.append(line)
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def check_larc(s: LinearSystemSpec) -> bool:
    """Smallest D-invariant subalgebra containing the control directions is all of g."""
    return d_invariant_closure(s.algebra, s.D, s.controls).dim == s.dim


def kalman_rank(A, B) -> int:
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return int(np.linalg.matrix_rank(np.hstack(blocks)))


def spectrum_signs(dec: SpectralDecomposition) -> dict:
    re = [z.real for z, _ in dec.eigenvalues]
    return {
        "all_nonpositive": all(r <= 0 for r in re),
        "all_nonnegative": all(r >= 0 for r in re),
        "all_zero": all(r == 0 for r in re),
        "has_positive": any(r > 0 for r in re),
        "has_negative": any(r < 0 for r in re),
    }


@dataclass
class Numerics:
    """Numerically observed facts that some rules consume."""

    cl_A_minus_compact: Optional[bool] = None  # cl(A ∩ G-) stays inside the box
    cl_Astar_plus_compact: Optional[bool] = None  # cl(A* ∩ G+) stays inside the box


def resolve_g0_compact(s: LinearSystemSpec, dec: SpectralDecomposition) -> Optional[bool]:
    flag = s.flags.G0_compact
    if flag == "auto":
        if s.flags.simply_connected and s.nilpotent:
            # exp is a diffeomorphism, so G0 is compact iff g0 = 0
            return dec.g_zero.dim == 0
        return None
    return bool(flag)


def classify(
    s: LinearSystemSpec,
    dec: SpectralDecomposition,
    larc: Optional[bool] = None,
    numerics: Optional[Numerics] = None,
) -> ClassificationReport:
    larc = check_larc(s) if larc is None else larc
    numerics = numerics or Numerics()
    a_open = larc if s.flags.a_open_assumed is None else bool(s.flags.a_open_assumed)
    signs = spectrum_signs(dec)
    nilpotent = s.nilpotent
    solvable = s.solvable
    fsc = s.finite_semisimple_center
    g0c = resolve_g0_compact(s, dec)
    sc = s.flags.simply_connected
    notes = []
    if s.flags.a_open_assumed is None:
        notes.append("openness of A is assumed from the LARC verdict")
    elif a_open and not larc:
        notes.append("A is declared open although LARC fails; openness implies LARC, so the flag is inconsistent")
    if not larc:
        notes.append("LARC fails: the reachable set has empty interior and no control set with nonempty interior is claimed")

    hyp_open = "A open" + (" (assumed)" if s.flags.a_open_assumed is None else "")
    hyp_nil = "G nilpotent"
    hyp_fsc = "G has finite semisimple center"

    # R1
    if a_open:
        c_exists = Verdict.fire("R1", True, [hyp_open, "0 in int Omega"])
    else:
        c_exists = Verdict.blocked("R1", [hyp_open])

    def nilpotent_rule(rule, holds):
        missing = []
        if not a_open:
            missing.append(hyp_open)
        if not nilpotent:
            missing.append(hyp_nil)
        if missing:
            return Verdict.blocked(rule, missing)
        return Verdict.fire(rule, holds, [hyp_open, hyp_nil, hyp_fsc + " (nilpotent)"])

    c_closed = nilpotent_rule("R2", signs["all_nonpositive"])
    c_open = nilpotent_rule("R3", signs["all_nonnegative"])
    c_equals_G = nilpotent_rule("R4", signs["all_zero"])

    # R5
    if a_open and nilpotent:
        controllable = Verdict.fire("R5", signs["all_zero"], [hyp_open, hyp_nil])
    elif a_open and fsc and signs["all_zero"]:
        controllable = Verdict.fire("R5", True, [hyp_open, hyp_fsc], "sufficient direction only")
    else:
        missing = [] if a_open else [hyp_open]
        if not nilpotent:
            missing.append(hyp_nil + " (or finite semisimple center with zero real parts)")
        controllable = Verdict.blocked("R5", missing)

    # R6
    if not a_open:
        c_bounded = Verdict.blocked("R6", [hyp_open])
    elif sc and nilpotent:
        hyps = [hyp_open, "G simply connected", hyp_nil]
        if not dec.hyperbolic:
            c_bounded = Verdict.fire("R6", False, hyps, "D is not hyperbolic")
        else:
            m, p = numerics.cl_A_minus_compact, numerics.cl_Astar_plus_compact
            if m is None or p is None:
                c_bounded = Verdict.blocked(
                    "R6", ["compactness of cl(A_{G-}) and cl(A*_{G+}) (needs numerics)"], hyps,
                    "spectral half checked: D hyperbolic",
                )
            else:
                c_bounded = Verdict.fire(
                    "R6", bool(m and p), hyps + ["numerical compactness of cl(A_{G-}) and cl(A*_{G+})"],
                    "both halves checked; compactness observed on the grid",
                )
    elif g0c is False:
        c_bounded = Verdict.fire("R6", False, [hyp_open, "G0 not compact"], "bounded C forces a compact G0")
    else:
        c_bounded = Verdict.blocked("R6", ["G simply connected and nilpotent"])

    # R7
    if c_exists.yes and (solvable or g0c):
        why = "G solvable" if solvable else "G0 compact"
        c_unique = Verdict.fire("R7", True, [hyp_open, why])
    else:
        missing = [] if c_exists.yes else [hyp_open]
        if not (solvable or g0c):
            missing.append("G solvable or G0 compact")
        c_unique = Verdict.blocked("R7", missing)

    # R8: equivalences, filled from the open/closed verdicts
    def linked(v: Verdict, target: str) -> Verdict:
        if v.value == UNKNOWN:
            return Verdict.blocked("R8", [f"a verdict on C being {target}"], [hyp_fsc])
        return Verdict.fire("R8", v.value, [hyp_fsc, f"{v.rule} verdict"])

    a_equals_G = linked(c_open, "open")
    a_star_equals_G = linked(c_closed, "closed")

    report = ClassificationReport(
        larc=larc,
        a_open_assumed=a_open,
        hyperbolic=dec.hyperbolic,
        spectrum_signs=signs,
        group={
            "nilpotent": nilpotent,
            "solvable": solvable,
            "simply_connected": sc,
            "finite_semisimple_center": fsc,
            "G0_compact": g0c,
            "nilpotency_class": s.nilpotency_class,
        },
        c_exists=c_exists,
        c_open=c_open,
        c_closed=c_closed,
        c_equals_G=c_equals_G,
        controllable=controllable,
        c_bounded=c_bounded,
        c_unique=c_unique,
        a_equals_G=a_equals_G,
        a_star_equals_G=a_star_equals_G,
        notes=notes,
    )
    check_consistency(report)
    return report


def check_consistency(r: ClassificationReport) -> None:
    problems = []
    if r.c_equals_G.yes and not (r.c_open.yes and r.c_closed.yes):
        problems.append("C = G but C is not both open and closed")
    if r.controllable.yes and not r.c_equals_G.yes and r.c_equals_G.value != UNKNOWN:
        problems.append("controllable but C != G")
    if r.c_open.yes and r.c_closed.yes and r.c_equals_G.no:
        problems.append("C open and closed but C != G (G is connected)")
    if r.c_equals_G.yes and r.c_bounded.yes:
        problems.append("C = G is bounded")
    for v in r.verdicts().values():
        if v.value != UNKNOWN and v.missing:
            problems.append(f"{v.rule} fired with missing hypotheses {v.missing}")
    if problems:
        raise ClassificationError("; ".join(problems))


@dataclass(frozen=True)
class IdentityReport:
    applicable: bool
    plus_zero_plus_minus: bool
    minus_zero_plus_plus: bool

    @property
    def ok(self) -> bool:
        return self.plus_zero_plus_minus and self.minus_zero_plus_plus


def decomposition_identities(dec: SpectralDecomposition, s: LinearSystemSpec) -> IdentityReport:
    """``g+0 + g- = g`` and ``g-0 + g+ = g`` as vector-space sums."""
    d = s.dim
    a = subspace_sum(dec.g_plus_zero.basis, dec.g_minus.basis).shape[0] == d
    b = subspace_sum(dec.g_minus_zero.basis, dec.g_plus.basis).shape[0] == d
    applicable = s.solvable or dec.g_zero.dim == 0
    return IdentityReport(applicable, a, b)
