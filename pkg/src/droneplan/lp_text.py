"""LP text interchange and the external-solver adapter.

Models are exported in the widely parsed LP format (Maximize / Subject To /
Binaries / End) with canonical column naming sorted by variable identity, so
exports are byte-stable across runs. The adapter round-trips a model through
a file pair and a user-supplied command template, then reads the solution
back through a small regex table tolerating "name value" and indexed line
formats.
"""

from __future__ import annotations

import re
import subprocess
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .milp_core import Constraint, ExplicitModel, MilpModel, VariableRef


class LpFormatError(ValueError):
    pass


def _coef_str(value: Fraction) -> str:
    f = float(value)
    return f"{f:.12g}"


def _sorted_columns(exp: ExplicitModel) -> list[VariableRef]:
    return sorted(exp.columns, key=lambda c: c.sort_key())


def export_lp_text(model: MilpModel | ExplicitModel) -> str:
    """Deterministic LP text for a model (materializes structured models)."""
    exp = model.explicit() if isinstance(model, MilpModel) else model
    order = _sorted_columns(exp)
    lines = ["\\ interval program export"]
    if exp.objective_constant:
        lines.append(f"\\ objective constant {_coef_str(exp.objective_constant)}")
    lines.append("Maximize")
    terms = []
    for ref in order:
        coef = exp.objective.get(exp.col_index[ref])
        if coef:
            sign = "+" if coef >= 0 else "-"
            terms.append(f"{sign} {_coef_str(abs(coef))} {ref.name()}")
    if terms:
        body = " ".join(terms).lstrip("+ ").strip()
    elif order:
        body = "0 " + order[0].name()
    else:
        body = "0"
    lines.append(f" obj: {body}")
    lines.append("Subject To")
    for c in exp.constraints:
        parts = []
        for col, coef in sorted(c.terms, key=lambda t: exp.columns[t[0]].sort_key()):
            sign = "+" if coef >= 0 else "-"
            parts.append(f"{sign} {abs(coef)} {exp.columns[col].name()}")
        sense = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
        lhs = " ".join(parts).lstrip("+ ").strip()
        lines.append(f" {c.name}: {lhs} {sense} {c.rhs}")
    lines.append("Binaries")
    names = [ref.name() for ref in order]
    for i in range(0, len(names), 8):
        lines.append(" " + " ".join(names[i : i + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


_NAME_RE = re.compile(
    r"z_r(?P<zr>\d+)$|"
    r"xu_r(?P<ur>\d+)_l(?P<ul>\d+)_t(?P<ut>\d+)$|"
    r"xd_r(?P<dr>\d+)_l(?P<dl>\d+)_t(?P<dt>\d+)$|"
    r"g_r(?P<gr>\d+)_i(?P<gi>\d+)_j(?P<gj>\d+)_t(?P<gt>\d+)$|"
    r"phi_i(?P<pi>\d+)_j(?P<pj>\d+)_t(?P<pt>\d+)$"
)


def ref_from_name(name: str) -> VariableRef:
    m = _NAME_RE.match(name)
    if not m:
        raise LpFormatError(f"unrecognized column name {name!r}")
    g = m.groupdict()
    if g["zr"] is not None:
        return VariableRef("accept", int(g["zr"]), None, None, None)
    if g["ur"] is not None:
        return VariableRef("up", int(g["ur"]), int(g["ul"]), None, int(g["ut"]))
    if g["dr"] is not None:
        return VariableRef("down", int(g["dr"]), int(g["dl"]), None, int(g["dt"]))
    if g["gr"] is not None:
        return VariableRef("turn", int(g["gr"]), None, (int(g["gi"]), int(g["gj"])), int(g["gt"]))
    return VariableRef("junction", None, None, (int(g["pi"]), int(g["pj"])), int(g["pt"]))


_TERM_RE = re.compile(r"([+-])?\s*(\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z][\w]*)")


def _parse_terms(text: str) -> list[tuple[str, Fraction]]:
    terms = []
    for sign, coef, name in _TERM_RE.findall(text):
        value = Fraction(coef) if coef else Fraction(1)
        if sign == "-":
            value = -value
        terms.append((name, value))
    return terms


def parse_lp_text(text: str) -> ExplicitModel:
    """Re-import LP text produced by :func:`export_lp_text`."""
    section = None
    objective_terms: list[tuple[str, Fraction]] = []
    constant = Fraction(0)
    raw_constraints: list[tuple[str, list[tuple[str, Fraction]], str, Fraction]] = []
    binaries: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            m = re.search(r"objective constant\s+(-?[\d.eE+-]+)", line)
            if m:
                constant = Fraction(m.group(1))
            continue
        lowered = line.lower()
        if lowered in ("maximize", "minimize", "subject to", "bounds", "binaries", "binary", "end", "general"):
            section = lowered
            continue
        if section == "maximize":
            body = line.split(":", 1)[1] if ":" in line else line
            objective_terms.extend(_parse_terms(body))
        elif section == "subject to":
            if ":" not in line:
                raise LpFormatError(f"constraint without name: {line!r}")
            name, body = line.split(":", 1)
            m = re.search(r"(<=|>=|=)\s*(-?\d+(?:\.\d+)?)\s*$", body)
            if not m:
                raise LpFormatError(f"constraint without sense: {line!r}")
            sense, rhs = m.group(1), Fraction(m.group(2))
            raw_constraints.append((name.strip(), _parse_terms(body[: m.start()]), sense, rhs))
        elif section in ("binaries", "binary"):
            binaries.extend(line.split())

    columns = [ref_from_name(n) for n in binaries]
    col_index = {ref: i for i, ref in enumerate(columns)}
    name_index = {ref.name(): i for i, ref in enumerate(columns)}
    objective: dict[int, Fraction] = {}
    for name, coef in objective_terms:
        objective[name_index[name]] = objective.get(name_index[name], Fraction(0)) + coef
    constraints = []
    for name, terms, sense, rhs in raw_constraints:
        if rhs.denominator != 1:
            raise LpFormatError(f"non-integer rhs in {name}")
        tuples = tuple((name_index[n], int(c)) for n, c in terms)
        constraints.append(Constraint(name, tuples, sense, int(rhs)))
    return ExplicitModel(
        columns=columns,
        col_index=col_index,
        constraints=constraints,
        objective=objective,
        objective_constant=constant,
    )


# ---------------------------------------------------------------------------
# External adapter
# ---------------------------------------------------------------------------

DEFAULT_SOLUTION_PATTERNS: tuple[tuple[str, str], ...] = (
    # name value
    (r"^\s*(?P<name>[A-Za-z][\w]*)\s+(?P<value>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*$", "name"),
    # indexed: "x<k> value" or "<k> value" against the sorted column order
    (r"^\s*x?(?P<index>\d+)\s+(?P<value>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*$", "index"),
)


@dataclass
class ExternalAdapter:
    """Runs an external solver through a command template.

    The template receives {in}, {out} and {tl} placeholders. The solution
    file is scanned line by line against the regex table; the first style
    that matches any line wins.
    """

    command: str
    patterns: tuple[tuple[str, str], ...] = DEFAULT_SOLUTION_PATTERNS
    infeasible_marker: str = "infeasible"

    def run(self, exp: ExplicitModel, time_limit: float, workdir: Path | None = None):
        from .solver import SolveResult, SolverError

        start = time.perf_counter()
        tmp = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="droneplan_lp_"))
        tmp.mkdir(parents=True, exist_ok=True)
        lp_path = tmp / "model.lp"
        sol_path = tmp / "model.sol"
        lp_path.write_text(export_lp_text(exp), encoding="utf-8")
        cmd = self.command.format(**{"in": str(lp_path), "out": str(sol_path), "tl": f"{time_limit:g}"})
        try:
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True, timeout=time_limit + 60)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise SolverError(f"external solver failed to run: {exc}") from exc
        if not sol_path.exists():
            raise SolverError(
                f"external solver wrote no solution file (rc={proc.returncode}, stderr={proc.stderr[:500]!r})"
            )
        text = sol_path.read_text(encoding="utf-8")
        if self.infeasible_marker and self.infeasible_marker in text.lower():
            return SolveResult(status="infeasible", wall_time=time.perf_counter() - start)

        order = _sorted_columns(exp)
        values: dict[VariableRef, int] = {}
        compiled = [(re.compile(p), kind) for p, kind in self.patterns]
        for line in text.splitlines():
            if line.lstrip().startswith("#"):
                continue
            for pattern, kind in compiled:
                m = pattern.match(line)
                if not m:
                    continue
                value = 1 if float(m.group("value")) > 0.5 else 0
                if kind == "name":
                    name = m.group("name")
                    try:
                        values[ref_from_name(name)] = value
                    except LpFormatError:
                        pass
                else:
                    idx = int(m.group("index"))
                    if 0 <= idx < len(order):
                        values[order[idx]] = value
                break
        if not values and exp.columns:
            raise SolverError("could not parse any variable from the solution file")
        assignment = {ref: values.get(ref, 0) for ref in exp.columns}
        objective = exp.objective_value(assignment)
        return SolveResult(
            status="optimal",
            assignment=assignment,
            objective_exact=objective,
            wall_time=time.perf_counter() - start,
        )


def solve_external(model, config):
    from .solver import SolveResult, SolverError

    if not config.command:
        raise SolverError("external backend requires a command template")
    exp = model.explicit() if isinstance(model, MilpModel) else model
    adapter = ExternalAdapter(command=config.command)
    result = adapter.run(exp, config.time_limit)
    if isinstance(model, MilpModel) and result.status == "optimal":
        from .milp_core import decode_routes

        result.routes = decode_routes(model, result.assignment)
    return result
