"""Command-line front end.

Object-producing verbs (decompositions, circuits, programs, polynomials)
always write canonical JSON; `--json` switches the number- and table-valued
verbs to JSON as well.  Exit status: 0 success, 2 domain error (error class
name on stderr), 1 I/O or parse error, 3 when `verify` finds a failing item.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import circuitc, latin, symrep, waring
from .errors import DomainError, NonRepresentableScale, OutOfRange
from .polyring import LaurentScalar, LinearForm, Poly, equiv_mod_eps

CACHE_ENV = "BORDERCX_CACHE_DIR"
EXIT_OK, EXIT_IO, EXIT_DOMAIN, EXIT_VERIFY = 0, 1, 2, 3


@dataclass
class JobConfig:
    command: str
    inputs: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    order: int | None = None
    jobs: int = 1
    output: str | None = None
    json: bool = False


# ---------------------------------------------------------------- encoding


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _read(path: str):
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


_TYPED = {
    "WaringDecomposition": waring.WaringDecomposition,
    "KumarExpr": waring.KumarExpr,
    "GAD": waring.GAD,
    "ProductForm": waring.ProductForm,
    "SigmaLambdaSigma": waring.SigmaLambdaSigma,
    "ExactRB": waring.ExactRB,
}


def decode(obj):
    """Rebuild a package object from its JSON encoding."""
    if isinstance(obj, dict):
        kind = obj.get("type")
        if kind in _TYPED:
            return _TYPED[kind].from_json(obj)
        if kind == "Continuant":
            return circuitc.ContinuantResult(int(obj["d"]), [LinearForm.from_json(f) for f in obj["forms"]])
        if "gates" in obj:
            return circuitc.Circuit.from_json(obj)
        if "factors" in obj and "dim" in obj:
            return circuitc.MatrixProgram.from_json(obj)
        if "terms" in obj and "nvars" in obj:
            return Poly.from_json(obj)
        if "coeffs" in obj:
            return LinearForm.from_json(obj)
    raise ValueError("unrecognized JSON object")


def encode(obj):
    if isinstance(obj, circuitc.ContinuantResult):
        return {"type": "Continuant", "d": obj.d, "forms": [f.to_json() for f in obj.forms], "r": obj.r}
    return obj.to_json()


def _orders(obj) -> set:
    """Cyclotomic orders of the scalars inside an encoded object."""
    out: set = set()
    if isinstance(obj, dict):
        if "N" in obj and "terms" in obj and isinstance(obj["N"], int):
            out.add(obj["N"])
        for v in obj.values():
            out |= _orders(v)
    elif isinstance(obj, list):
        for v in obj:
            out |= _orders(v)
    return out


def _load(cfg: JobConfig, i: int = 0):
    raw = _read(cfg.inputs[i])
    if cfg.order is not None:
        bad = sorted(n for n in _orders(raw) if cfg.order % n)
        if bad:
            raise NonRepresentableScale(f"scalars of order {bad} do not live in Q(zeta_{cfg.order})")
    return decode(raw)


def _partition(text: str) -> symrep.Partition:
    text = text.strip().strip("()[]")
    return symrep.Partition(int(t) for t in text.replace(" ", ",").split(",") if t)


# ---------------------------------------------------------------- verbs


def _scan_rows(cfg: JobConfig, d: int, D: int) -> list:
    cache = os.environ.get(CACHE_ENV)
    path = Path(cache) / f"scan-{d}-{D}.json" if cache else None
    if path is not None and path.exists():
        return [(symrep.Partition(lam), a, b) for lam, a, b in json.loads(path.read_text())]
    rows = symrep.obstruction_scan(d, D, jobs=cfg.jobs)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps([[list(lam), a, b] for lam, a, b in rows]))
    return rows


def _circuit_in(cfg: JobConfig) -> circuitc.Circuit:
    c = _load(cfg)
    if not isinstance(c, circuitc.Circuit):
        raise ValueError("expected a circuit")
    return c


def _pos(text: str):
    if text == "trace":
        return text
    i, j = (int(t) for t in text.split(","))
    return (i, j)


def run_command(cfg: JobConfig):
    """Dispatch one command; returns (value, is_object)."""
    p = cfg.params
    c = cfg.command
    if c == "plethysm":
        return symrep.plethysm_coeff(_partition(p["mu"]), p["outer"], p["inner"], method=p["method"]), False
    if c == "orbit-mult":
        return symrep.orbit_mult_P11(_partition(p["lam"]), p["d"], p["D"]), False
    if c == "powersum-mult":
        return symrep.orbit_mult_powersum(_partition(p["kappa"]), p["d"], p["D"], p["m"]), False
    if c == "scan":
        return _scan_rows(cfg, p["d"], p["D"]), False
    if c == "obstruction-check":
        return list(symrep.reduced_obstruction_check(p["d"])), False
    if c == "kumar-build":
        return waring.kumar_build(_load(cfg), border=not p["exact"]), True
    if c == "kumar-invert":
        return waring.kumar_invert(_load(cfg), p["d"]), True
    if c == "gad":
        return waring.gad_from_border(_load(cfg)), True
    if c == "deborder":
        return waring.deborder_waring(_load(cfg)), True
    if c == "rb-deborder":
        raw = _read(cfg.inputs[0])
        lf = [LinearForm.from_json(f) for f in raw["lf"]]
        lfr = [LinearForm.from_json(f) for f in raw["lfr"]]
        return waring.rb_deborder(lf, lfr, int(raw["k"])), True
    if c == "essential-vars":
        obj = _load(cfg)
        f = obj if isinstance(obj, Poly) else obj.limit()
        return waring.essential_variables(f), False
    if c == "ihl":
        return circuitc.ihl_homogenize(_circuit_in(cfg)), True
    if c == "arity3":
        return circuitc.to_arity3(_circuit_in(cfg)), True
    if c == "brent":
        return circuitc.brent_arity3(_circuit_in(cfg)), True
    if c == "vsbr":
        return circuitc.vsbr_arity3(_circuit_in(cfg)), True
    if c == "boc":
        return circuitc.ben_or_cleve(_circuit_in(cfg), _pos(p["pos"])), True
    if c == "boc-trace":
        return circuitc.ben_or_cleve_trace(_circuit_in(cfg)), True
    if c == "continuant-compile":
        return circuitc.continuant_compile(_circuit_in(cfg), p["d"]), True
    if c == "cpoly":
        return circuitc.c_poly(p["n"], p["d"]), True
    if c == "alon-tarsi":
        return latin.alon_tarsi_difference(p["n"], brute=p["brute"]), False
    if c == "fund-inv":
        d = p["d"]
        if not 1 <= d <= 4:
            raise OutOfRange("fund-inv supports 1 <= d <= 4")
        T = latin.Tableau.row_blocks(d + 1, d)
        v = latin.fundamental_invariant_eval(T, latin.alon_tarsi_point(d), literal=p["literal"])
        return _as_int(v), False
    if c == "verify":
        return verify(_read(cfg.inputs[0])), False
    raise ValueError(f"unknown command {c}")


def _as_int(v):
    q = v.rational() if hasattr(v, "rational") else None
    if q is not None and q.denominator == 1:
        return int(q)
    return str(v)


# ---------------------------------------------------------------- verify


def _value(obj) -> Poly:
    if isinstance(obj, Poly):
        return obj
    if isinstance(obj, circuitc.Circuit):
        return obj.eval()[0] if len(obj.outputs) == 1 else None
    if isinstance(obj, circuitc.ContinuantResult):
        return obj.evaluate()
    if isinstance(obj, circuitc.MatrixProgram):
        return obj.value(cutoff=1)
    if hasattr(obj, "expand"):
        return obj.expand()
    raise ValueError(f"cannot evaluate {type(obj).__name__}")


def _limit(obj) -> Poly:
    if hasattr(obj, "limit") and not isinstance(obj, Poly):
        return obj.limit()
    return _value(obj).truncate(1).limit()


def _check_eval(a, b):
    if isinstance(a, circuitc.Circuit) and isinstance(b, circuitc.Circuit):
        va, vb = a.eval(), b.eval()
        bad = [i for i, (x, y) in enumerate(zip(va, vb)) if x != y]
        if len(va) != len(vb):
            return False, "output counts differ"
        return not bad, None if not bad else f"outputs {bad} differ: {va[bad[0]] - vb[bad[0]]!r}"
    diff = _value(a) - _value(b)
    return diff.is_zero(), None if diff.is_zero() else repr(diff)


def _check_mod_eps(a, b):
    x, y = _value(a), _value(b)
    ok = equiv_mod_eps(x, y)
    return ok, None if ok else repr((x - y).truncate(1))


def _check_matrix(a, b):
    if not isinstance(b, circuitc.MatrixProgram):
        raise ValueError("matrix-identity needs a MatrixProgram as output")
    f = _value(a)
    if b.position == "trace" or not b.alpha.is_eps_free() or b.position[0] == b.position[1]:
        got = b.value(cutoff=1).limit()
        ok = got == f
        return ok, None if ok else repr(got - f)
    M = b.expand()
    i, j = b.position
    for r in range(b.dim):
        for s in range(b.dim):
            want = f if (r + 1, s + 1) == (i, j) else Poly.zero(f.nvars)
            if M[r][s] != want:
                return False, f"entry ({r + 1},{s + 1}) off by {M[r][s] - want!r}"
    return True, None


def _check_limit(a, b):
    x, y = _limit(a), _limit(b)
    return x == y, None if x == y else repr(x - y)


RELATIONS = {
    "eval-equality": _check_eval,
    "equiv-mod-eps": _check_mod_eps,
    "matrix-identity": _check_matrix,
    "boc": _check_matrix,
    "limit-equal": _check_limit,
}


def verify(bundle) -> list:
    """Re-check every item of a bundle; returns one report dict per item.

    A bundle is {"items": [{"relation", "input", "output"}, ...]} or one item.
    """
    items = bundle["items"] if "items" in bundle else [bundle]
    report = []
    for k, item in enumerate(items):
        rel = item["relation"]
        if rel not in RELATIONS:
            raise UnknownRelation(f"unknown relation {rel!r}")
        ok, residual = RELATIONS[rel](decode(item["input"]), decode(item["output"]))
        row = {"item": k, "relation": rel, "pass": bool(ok)}
        if residual is not None:
            row["residual"] = residual
        report.append(row)
    return report


class UnknownRelation(DomainError):
    pass


# ---------------------------------------------------------------- argument parsing


def _parser() -> argparse.ArgumentParser:
    def common(suppress: bool) -> argparse.ArgumentParser:
        g = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS if suppress else None)
        g.add_argument("--json", action="store_true", help="structured output for every verb")
        g.add_argument("-o", "--output", help="write the result here instead of stdout")
        g.add_argument("--order", type=int, help="require input scalars to live in Q(zeta_N)")
        g.add_argument("-j", "--jobs", type=int, help="worker processes for scans")
        return g

    ap = argparse.ArgumentParser(prog="bordercx", parents=[common(False)],
                                 description="Border decompositions, plethysm scans and circuit compilers.")
    ap.set_defaults(json=False, jobs=1)
    sub = ap.add_subparsers(dest="command", required=True)
    shared = common(True)

    def cmd(name, **kw):
        return sub.add_parser(name, parents=[shared], **kw)

    s = cmd("plethysm", help="a_mu(outer, inner)")
    s.add_argument("mu")
    s.add_argument("outer", type=int)
    s.add_argument("inner", type=int)
    s.add_argument("--method", choices=["weight", "powersum"], default="weight")
    s = cmd("orbit-mult", help="multiplicity in the orbit ring of x1...xd + x_{d+1}^d")
    s.add_argument("lam")
    s.add_argument("d", type=int)
    s.add_argument("D", type=int)
    s = cmd("powersum-mult", help="multiplicity in the orbit ring of a power sum")
    s.add_argument("kappa")
    s.add_argument("d", type=int)
    s.add_argument("D", type=int)
    s.add_argument("m", type=int)
    s = cmd("scan", help="partitions where the plethysm exceeds the orbit multiplicity")
    s.add_argument("d", type=int)
    s.add_argument("D", type=int)
    s.add_argument("--subscript", action="store_true", help="subscript notation instead of TSV")
    s = cmd("obstruction-check")
    s.add_argument("d", type=int)

    for name in ("kumar-build", "kumar-invert", "gad", "deborder", "rb-deborder", "essential-vars"):
        s = cmd(name)
        s.add_argument("input")
        if name == "kumar-build":
            s.add_argument("--exact", action="store_true")
        if name == "kumar-invert":
            s.add_argument("--d", type=int, required=True)

    for name in ("ihl", "arity3", "brent", "vsbr", "boc", "boc-trace", "continuant-compile"):
        s = cmd(name)
        s.add_argument("input")
        if name == "boc":
            s.add_argument("--pos", default="1,2")
        if name == "continuant-compile":
            s.add_argument("--d", type=int, required=True)
    s = cmd("cpoly")
    s.add_argument("n", type=int)
    s.add_argument("d", type=int)

    s = cmd("alon-tarsi")
    s.add_argument("n", type=int)
    s.add_argument("--brute", action="store_true")
    s = cmd("fund-inv")
    s.add_argument("d", type=int)
    s.add_argument("--literal", action="store_true")
    s = cmd("verify")
    s.add_argument("input")
    return ap


_GLOBAL = {"json", "output", "order", "jobs", "command", "input"}


def config_from_args(argv=None) -> JobConfig:
    ns = _parser().parse_args(argv)
    params = {k: v for k, v in vars(ns).items() if k not in _GLOBAL}
    inputs = [ns.input] if getattr(ns, "input", None) else []
    return JobConfig(ns.command, inputs, params, ns.order, ns.jobs, ns.output, ns.json)


def _render(cfg: JobConfig, value, is_object: bool) -> str:
    if is_object:
        return dumps(encode(value))
    if cfg.command == "scan":
        if cfg.json:
            return dumps([{"lambda": list(lam), "a": a, "b": b} for lam, a, b in value])
        if cfg.params.get("subscript"):
            return symrep.format_scan_subscript(value)
        return symrep.format_scan_tsv(value).rstrip("\n")
    if cfg.command == "verify":
        if cfg.json:
            return dumps(value)
        lines = []
        for row in value:
            tag = "PASS" if row["pass"] else "FAIL"
            extra = f"\t{row['residual']}" if "residual" in row else ""
            lines.append(f"{row['item']}\t{row['relation']}\t{tag}{extra}")
        return "\n".join(lines)
    if cfg.json:
        return dumps({"command": cfg.command, "value": value})
    if isinstance(value, list):
        return " ".join(str(v) for v in value)
    return str(value)


def run(cfg: JobConfig) -> int:
    try:
        value, is_object = run_command(cfg)
        text = _render(cfg, value, is_object)
        if cfg.output:
            Path(cfg.output).write_text(text + "\n")
        elif text:
            print(text)
    except DomainError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    if cfg.command == "verify" and not all(row["pass"] for row in value):
        return EXIT_VERIFY
    return EXIT_OK


def main(argv=None) -> int:
    return run(config_from_args(argv))


if __name__ == "__main__":
    sys.exit(main())
