"""Canonical text formats for cell measures and characteristic-functional tables.

Rationals are written as ``"num/den"`` strings in lowest terms; files are
compact JSON with sorted keys, so equal objects serialize to equal bytes.
"""

from __future__ import annotations

import json
from fractions import Fraction

from uml.fourier import ThetaTable
from uml.measures import CellMeasure
from uml.padic import Ball, PrimePair
from uml.svalues import CycloValue

MEASURE_FORMAT = "uml-measure/1"
TABLE_FORMAT = "uml-theta/1"


class FormatError(ValueError):
    pass


def frac_str(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(text) -> Fraction:
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise FormatError(f"expected a rational string, got {text!r}")
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise FormatError(f"bad rational {text!r}") from e


def value_str(v) -> str:
    """Exact text for a rational or cyclotomic value."""
    if isinstance(v, CycloValue):
        return frac_str(v.to_fraction()) if v.is_rational() else str(v)
    return frac_str(v)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def measure_to_obj(mu: CellMeasure) -> dict:
    mu = mu.canonical()
    return {
        "format": MEASURE_FORMAT,
        "p": mu.p,
        "s": mu.s,
        "dim": mu.dim,
        "mass": frac_str(mu.total_mass()),
        "cells": [
            {
                "center": [frac_str(c) for c in b.center],
                "radius_exp": list(b.exps),
                "density": frac_str(d),
            }
            for b, d in mu.cells
        ],
    }


def dump_measure(mu: CellMeasure) -> str:
    return _dumps(measure_to_obj(mu))


def _header(obj: dict, fmt: str) -> tuple[PrimePair, int]:
    if not isinstance(obj, dict) or obj.get("format") != fmt:
        raise FormatError(f"expected format {fmt!r}")
    try:
        pp = PrimePair(int(obj["p"]), int(obj["s"]))
        dim = int(obj["dim"])
    except (KeyError, TypeError) as e:
        raise FormatError(f"missing or bad header field: {e}") from e
    except ValueError as e:
        raise FormatError(str(e)) from e
    return pp, dim


def measure_from_obj(obj: dict) -> CellMeasure:
    pp, dim = _header(obj, MEASURE_FORMAT)
    cells = []
    for rec in obj.get("cells", []):
        try:
            center = tuple(parse_frac(c) for c in rec["center"])
            exps = tuple(int(k) for k in rec["radius_exp"])
            d = parse_frac(rec["density"])
        except (KeyError, TypeError) as e:
            raise FormatError(f"bad cell record {rec!r}") from e
        if len(center) != dim or len(exps) != dim:
            raise FormatError(f"cell {rec!r} does not have dimension {dim}")
        cells.append((Ball(pp.p, center, exps), d))
    try:
        mu = CellMeasure(pp, dim, tuple(cells))
    except ValueError as e:
        raise FormatError(str(e)) from e
    if "mass" in obj and parse_frac(obj["mass"]) != mu.total_mass():
        raise FormatError("recorded mass does not match the cells")
    return mu


def load_measure(text: str) -> CellMeasure:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"not JSON: {e}") from e
    return measure_from_obj(obj)


def cyclo_to_obj(v: CycloValue) -> dict:
    return {"level": v.level, "coeffs": [frac_str(c) for c in v.coeffs]}


def cyclo_from_obj(p: int, obj: dict) -> CycloValue:
    try:
        level = int(obj["level"])
        coeffs = [parse_frac(c) for c in obj["coeffs"]]
    except (KeyError, TypeError) as e:
        raise FormatError(f"bad cyclotomic value {obj!r}") from e
    vec = coeffs + [Fraction(0)] * (p**level - len(coeffs))
    return CycloValue.from_group_ring(p, level, vec)


def dump_table(t: ThetaTable) -> str:
    samples = [
        {"z": [frac_str(c) for c in z], "value": cyclo_to_obj(v)}
        for z, v in sorted(t.samples.items())
    ]
    return _dumps({
        "format": TABLE_FORMAT,
        "p": t.pp.p,
        "s": t.pp.s,
        "dim": t.dim,
        "level": t.level,
        "support_exp": t.support_exp,
        "samples": samples,
    })


def load_table(text: str) -> ThetaTable:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"not JSON: {e}") from e
    pp, dim = _header(obj, TABLE_FORMAT)
    samples = {}
    for rec in obj.get("samples", []):
        z = tuple(parse_frac(c) for c in rec["z"])
        if len(z) != dim:
            raise FormatError(f"sample {rec!r} does not have dimension {dim}")
        samples[z] = cyclo_from_obj(pp.p, rec["value"])
    return ThetaTable(pp, dim, int(obj["level"]), samples, int(obj.get("support_exp", 0)))
