"""Command line interface: batch reports for predictions, counts and diagnostics.

Exit codes: 0 success, 2 invalid configuration, 3 oracle bound exceeded,
4 geometric degeneracy (for example a Dirichlet polygon that does not close).
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path
from typing import Optional

from .analytic import (congruence_data, gaussian_closed_constant, dedekind_zeta2_bound, iota_f,
                       predicted_constant)
from .automorphs import AutomorphSet, FiniteImage, build_fuchsian, find_automorphs
from .counting import CountRequest, count_orbits, covolume_for, fit_and_compare, prediction_for
from .forms import HermitianForm, compose_form
from .hyperbolic import GeometryError
from .ring import Field, OracleBoundError, QuadIdeal, QuadInt, index_closed_forms, sl2_index_oracle

EXIT_CONFIG, EXIT_ORACLE, EXIT_GEOMETRY = 2, 3, 4

_TERM = re.compile(r"([+-]?)\s*(\d*)\s*\*?\s*([wi]?)")


class ConfigError(ValueError):
    pass


def parse_element(text: str, K: Field) -> QuadInt:
    """Parse 'x+y*w' (w the integral basis element) or, over Q(i), 'x+y*i'."""
    s = text.replace(" ", "")
    if not s:
        raise ConfigError("empty element")
    total = K.zero
    pos = 0
    while pos < len(s):
        m = _TERM.match(s, pos)
        if not m or m.end() == pos or (not m.group(2) and not m.group(3)):
            raise ConfigError(f"cannot parse element {text!r}")
        sign = -1 if m.group(1) == "-" else 1
        coef = int(m.group(2)) if m.group(2) else 1
        unit = m.group(3)
        if unit == "w":
            total = total + K(0, sign * coef)
        elif unit == "i":
            if K.D != -4:
                raise ConfigError("'i' is only available for D_K = -4; use w")
            total = total + K.i() * (sign * coef)
        else:
            total = total + K(sign * coef, 0)
        pos = m.end()
        if pos < len(s) and s[pos] not in "+-":
            raise ConfigError(f"cannot parse element {text!r}")
    return total


def parse_form(text: str, K: Field) -> HermitianForm:
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 4:
            a, bx, by, c = (int(p) for p in parts)
            return HermitianForm(a, K(bx, by), c)
        if len(parts) == 3:
            return HermitianForm(int(parts[0]), parse_element(parts[1], K), int(parts[2]))
    except ValueError as e:
        raise ConfigError(f"bad form {text!r}: {e}") from e
    raise ConfigError(f"form must be 'a,bx,by,c' or 'a,bx+by*w,c', got {text!r}")


def parse_ideal(text: str, K: Field) -> QuadIdeal:
    gens = [parse_element(t, K) for t in text.split(",")]
    if all(g.is_zero() for g in gens):
        raise ConfigError("the zero ideal is not allowed")
    return QuadIdeal.from_generators([g for g in gens if not g.is_zero()])


def parse_grid(text: str) -> list[int]:
    try:
        grid = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise ConfigError(f"bad s-grid {text!r}") from e
    if not grid or grid != sorted(set(grid)) or grid[0] <= 0:
        raise ConfigError("s-grid must be strictly increasing positive integers")
    return grid


def _field(args) -> Field:
    try:
        return Field(args.DK)
    except ValueError as e:
        raise ConfigError(str(e)) from e


# ---------------------------------------------------------------------------
# generator cache

def _cache_path(cache_dir: str, f: HermitianForm, height: int) -> Path:
    K = f.field
    name = f"gens_D{K.D}_a{f.a}_b{f.b.x}_{f.b.y}_c{f.c}_h{height}.json"
    return Path(cache_dir) / name


def load_or_search(f: HermitianForm, height: int, cache_dir: Optional[str], seed: int = 0,
                   max_height: int = 3200):
    """Automorph set and Fuchsian data, doubling the search height until the domain closes."""
    if cache_dir:
        p = _cache_path(cache_dir, f, height)
        if p.exists():
            aset = AutomorphSet.from_json(json.loads(p.read_text()))
            if aset.form == f:
                return aset, build_fuchsian(aset, seed=seed), "cache"
    h = height
    while True:
        aset = find_automorphs(f, h)
        try:
            fd = build_fuchsian(aset, seed=seed)
            break
        except GeometryError:
            if 2 * h > max_height:
                raise
            h *= 2
    if cache_dir:
        p = _cache_path(cache_dir, f, height)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(aset.to_json(), sort_keys=True))
    return aset, fd, "search"


# ---------------------------------------------------------------------------
# commands

def _resolved(args, **extra) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "cache_dir")}
    cfg.update(extra)
    return cfg


def config_to_argv(cfg: dict) -> list[str]:
    """Command line that reproduces a report from its embedded config."""
    argv = [cfg["command"]]
    for key, value in sorted(cfg.items()):
        if key in ("command", "request") or value is None or value is False:
            continue
        flag = "--" + (key if key == "DK" else key.replace("_", "-"))
        if value is True:
            argv.append(flag)
        else:
            argv += [flag, str(value)]
    return argv


def _group(args, K: Field):
    kind = getattr(args, "kind", "full") or "full"
    ideal_text = getattr(args, "ideal", None)
    if kind == "full":
        if ideal_text:
            raise ConfigError("--ideal needs --kind level or hecke")
        return "full", None
    if not ideal_text:
        raise ConfigError(f"--kind {kind} needs --ideal")
    return kind, parse_ideal(ideal_text, K)


def cmd_zeta(args) -> dict:
    K = _field(args)
    if args.tol < 1e-12:
        raise ConfigError("--tol must be >= 1e-12")
    value, err = dedekind_zeta2_bound(K, args.tol)
    return {"config": _resolved(args), "zeta_K2": value, "error_bound": err}


def cmd_index(args) -> dict:
    K = _field(args)
    I = parse_ideal(args.ideal, K)
    key = "full_level" if args.kind == "level" else "hecke"
    oracle = sl2_index_oracle(I, key, args.oracle_bound)
    forms = index_closed_forms(I)
    classical, swapped = forms["classical"][key], forms["swapped"][key]
    return {"config": _resolved(args), "ideal": I.to_json(), "norm": I.norm(), "oracle": oracle,
            "classical": _num(classical), "swapped": _num(swapped),
            "warning": swapped != oracle}


def _num(q):
    return int(q) if q.denominator == 1 else str(q)


def cmd_predict(args) -> dict:
    K = _field(args)
    f = parse_form(args.form, K)
    if f.discriminant <= 0:
        raise ConfigError("the form must be indefinite (discriminant > 0)")
    kind, ideal = _group(args, K)
    out = {"config": _resolved(args), "Delta": f.discriminant, "D_K": K.D}
    need_domain = K.D != -4 or kind != "full" or f.a == 0
    if need_domain:
        work = f
        if f.a == 0:
            from .counting import normalize_form
            work, _ = normalize_form(f)
        _, fd, source = load_or_search(work, args.generator_height, args.cache_dir, args.seed)
        pc, extra = prediction_for(work, fd, kind, ideal)
        out.update(extra)
    else:
        from .analytic import covolume_gaussian
        covol = covolume_gaussian(f.primitive_part())
        pc = predicted_constant(f, covol)
        out.update({"covolume_source": "closed_form", "covolume_full": covol})
    if K.D == -4:
        out["iota_f"] = iota_f(f)
        if kind == "full":
            out["gaussian_closed_form"] = gaussian_closed_constant(f).value
    out["constant"] = pc.value
    out["prediction"] = pc.to_json()
    return out


def _count_request(args, K: Field) -> CountRequest:
    f = parse_form(args.form, K)
    kind, ideal = _group(args, K)
    grid = parse_grid(args.s_grid)
    try:
        return CountRequest(f, grid, height_bound=args.height, group=kind, ideal=ideal,
                            include_null=args.include_null, generator_height=args.generator_height,
                            seed=args.seed, tol=args.tol, height_factor=args.height_factor,
                            threads=args.threads)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _run_count(args):
    K = _field(args)
    req = _count_request(args, K)
    f = req.form
    if req.group == "full" and f.a <= 0:
        from .counting import normalize_form
        f, _ = normalize_form(f)
    elif f.a == 0:
        raise ConfigError("congruence counts need a != 0")
    _, fd, _ = load_or_search(f, req.generator_height, args.cache_dir, req.seed)
    report = count_orbits(req, fd if fd.form == f else None)
    report.config = _resolved(args, request=req.to_json())
    return report


def cmd_count(args):
    report = _run_count(args)
    return report


def cmd_compare(args):
    report = _run_count(args)
    summary = fit_and_compare(report, report.prediction["value"])
    report.diagnostics["summary"] = summary
    return report


def cmd_automorphs(args) -> dict:
    K = _field(args)
    f = parse_form(args.form, K)
    if f.discriminant <= 0:
        raise ConfigError("the form must be indefinite")
    aset = find_automorphs(f, args.height)
    log = [{"matrix": g.to_json(), "verified": compose_form(f, g) == f} for g in aset.gens]
    if args.cache_dir:
        p = _cache_path(args.cache_dir, f, args.height)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(aset.to_json(), sort_keys=True))
    return {"config": _resolved(args), "count": len(aset.gens), "generators": log,
            "all_verified": all(e["verified"] for e in log)}


def cmd_domain(args) -> dict:
    K = _field(args)
    f = parse_form(args.form, K)
    if f.a == 0:
        raise ConfigError("the domain command needs a != 0")
    aset, fd, source = load_or_search(f, args.generator_height, args.cache_dir, args.seed)
    out = {"config": _resolved(args), "area": fd.area, "area_over_pi": fd.area / math.pi,
           "search_height": aset.search_height, "ball_size": int(len(fd.ball)), "radius": fd.radius,
           "polygon": fd.polygon.to_json(),
           "side_pairings": [fd.element(int(i)).to_json() for i in fd.sides]}
    if K.D == -4:
        covol, _ = covolume_for(f, fd)
        out["closed_form_covolume"] = covol
        out["relative_error"] = (fd.area - covol) / covol
    return out


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hermcount", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, form=True):
        sp.add_argument("--DK", type=int, default=-4, help="fundamental discriminant of K (default -4)")
        if form:
            sp.add_argument("--form", required=True,
                            help="a,bx,by,c or a,bx+by*w,c with w=(D+sqrt D)/2 (over Q(i) 'i' is accepted)")
        sp.add_argument("--out", help="output path (JSON; count/compare also write a .csv sibling)")
        sp.add_argument("--seed", type=int, default=0, help="seed of the Dirichlet base point")
        sp.add_argument("--cache-dir", dest="cache_dir", help="directory for the generator cache")

    def groups(sp):
        sp.add_argument("--kind", choices=("full", "level", "hecke"), default="full")
        sp.add_argument("--ideal", help="ideal generators, e.g. 1+i or 2,1+w")

    sp = sub.add_parser("predict", help="predicted asymptotic constant with all inputs")
    common(sp)
    groups(sp)
    sp.add_argument("--generator-height", type=int, default=20)
    sp.set_defaults(func=cmd_predict)

    for name, fn, hlp in (("count", cmd_count, "orbit counts psi(s) on a grid"),
                          ("compare", cmd_compare, "counts, prediction and gap summary")):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        groups(sp)
        sp.add_argument("--s-grid", default="25,50,100", help="comma separated increasing s values")
        sp.add_argument("--height", type=int, default=None, help="height bound (default 4*s_max)")
        sp.add_argument("--height-factor", type=int, default=4)
        sp.add_argument("--generator-height", type=int, default=20)
        sp.add_argument("--include-null", action="store_true")
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--threads", type=int, default=1)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("automorphs", help="exhaustive automorph search with exact verification")
    common(sp)
    sp.add_argument("--height", type=int, default=20)
    sp.set_defaults(func=cmd_automorphs)

    sp = sub.add_parser("domain", help="Dirichlet polygon and Gauss-Bonnet area")
    common(sp)
    sp.add_argument("--generator-height", type=int, default=20)
    sp.set_defaults(func=cmd_domain)

    sp = sub.add_parser("zeta", help="zeta_K(2) with a rigorous error bound")
    common(sp, form=False)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_zeta)

    sp = sub.add_parser("index", help="congruence subgroup indices: oracle and closed forms")
    common(sp, form=False)
    sp.add_argument("--ideal", required=True)
    sp.add_argument("--kind", choices=("level", "hecke"), default="level")
    sp.add_argument("--oracle-bound", type=int, default=4096)
    sp.set_defaults(func=cmd_index)
    return p


def _emit(result, out: Optional[str]) -> None:
    from .counting import ConvergenceReport
    if isinstance(result, ConvergenceReport):
        text = result.dumps()
        if out:
            Path(out).write_text(text + "\n")
            Path(out).with_suffix(".csv").write_text(result.to_csv())
        else:
            sys.stdout.write(result.to_csv())
            sys.stdout.write(text + "\n")
        return
    text = json.dumps(result, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def run_command(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        result = args.func(args)
        _emit(result, args.out)
    except OracleBoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ORACLE
    except GeometryError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GEOMETRY
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
