"""Dataset ingestion and command execution behind the CLI.

:func:`execute` takes a plain mapping of arguments, validates it against the
command's schema and returns a :class:`CommandResult` that serialises to
JSON or CSV without loss.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

import numpy as np

from . import asymptotics as asy
from .bayes import log_intrinsic_bf
from .errors import IntrinsicBFError, MissingColumn, ParseError, SchemaError
from .linear import DesignMatrix, bip_statistic, build_nested_pair, effect_coded_design
from .simulation import DEFAULT_SEED, ExperimentConfig, run_experiment

__all__ = [
    "OUTPUT_DIR_ENV",
    "Dataset",
    "CommandResult",
    "parse_dataset",
    "read_csv_table",
    "parse_grid",
    "parse_regime",
    "execute",
]

OUTPUT_DIR_ENV = "INTRINSIC_BF_OUTPUT_DIR"

# exp() of anything above this overflows a double.
_LOG_MAX = math.log(np.finfo(float).max)
_LOG_MIN = -745.0


@dataclass(frozen=True, eq=False)
class Dataset:
    y: np.ndarray
    X: DesignMatrix
    column_names: tuple[str, ...]


@dataclass
class CommandResult:
    command: str
    inputs_echo: dict[str, Any]
    outputs: dict[str, Any]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self, indent: int | None = 2) -> str:
        # repr-based float formatting round-trips every double exactly.
        return json.dumps(self.to_dict(), indent=indent)

    def table(self) -> list[dict[str, Any]]:
        if "rows" in self.outputs:
            return list(self.outputs["rows"])
        return [_flatten(self.outputs)]

    def to_csv(self) -> str:
        rows = self.table()
        buf = io.StringIO()
        header: list[str] = []
        for row in rows:
            header.extend(k for k in row if k not in header)
        writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(v) for k, v in row.items()})
        return buf.getvalue()


def _flatten(d: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = ";".join(str(x) for x in v)
        else:
            out[key] = v
    return out


def _csv_cell(v: Any) -> Any:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def read_csv_table(csv_path: str) -> tuple[list[str], list[list[str]]]:
    if not os.path.exists(csv_path):
        raise FileNotFoundError(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{csv_path}: empty file, header row expected") from None
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise MissingColumn(f"{csv_path}: duplicate column names {dupes}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{csv_path}: row {lineno} has {len(row)} fields, expected {len(header)}",
                    row=lineno,
                )
            rows.append(row)
    return header, rows


def parse_dataset(csv_path: str, response_column: str) -> Dataset:
    """Read a numeric CSV; the response column becomes ``y``, every other
    column (in header order) a column of ``X``. Rows are numbered as file
    lines, the header being line 1."""
    header, rows = read_csv_table(csv_path)
    if response_column not in header:
        raise MissingColumn(f"{csv_path}: response column {response_column!r} not in header")
    values = np.empty((len(rows), len(header)))
    for r, row in enumerate(rows):
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{csv_path}: row {r + 2}, column {header[c]!r}: "
                    f"non-numeric value {cell!r}",
                    row=r + 2,
                    column=header[c],
                ) from None
            if not math.isfinite(values[r, c]):
                raise ParseError(
                    f"{csv_path}: row {r + 2}, column {header[c]!r}: non-finite value",
                    row=r + 2,
                    column=header[c],
                )
    if not rows:
        raise ParseError(f"{csv_path}: no data rows")
    ycol = header.index(response_column)
    xcols = [c for c in range(len(header)) if c != ycol]
    return Dataset(
        values[:, ycol].copy(),
        DesignMatrix(values[:, xcols]),
        tuple(header[c] for c in xcols),
    )


def parse_grid(spec: str | float | list | tuple, integer: bool = False) -> list:
    """Grid from ``"a,b,c"``, ``"start:stop:step"`` (inclusive) or
    ``"start:stop:double"`` (geometric, factor 2)."""
    conv = int if integer else float
    if isinstance(spec, (int, float)):
        return [conv(spec)]
    if isinstance(spec, (list, tuple)):
        return [conv(v) for v in spec]
    spec = spec.strip()
    try:
        if ":" not in spec:
            return [conv(v) for v in spec.split(",") if v.strip()]
        start_s, stop_s, step_s = spec.split(":")
        start, stop = float(start_s), float(stop_s)
        out = []
        if step_s.strip() == "double":
            if start <= 0:
                raise ValueError
            v = start
            while v <= stop * (1 + 1e-12):
                out.append(conv(v))
                v *= 2
            return out
        step = float(step_s)
        if step <= 0:
            raise ValueError
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [conv(round(start + k * step, 12)) for k in range(max(count, 0))]
    except ValueError:
        raise SchemaError(f"bad grid specification {spec!r}") from None


def _opt_float(text: str) -> float | None:
    text = text.strip()
    if text in ("", "-", "none", "None", "nan"):
        return None
    return float(text)


def parse_regime(spec: str | Mapping | None) -> asy.GrowthRegime | None:
    """``"a,b[,r[,s]]"`` or a mapping with those keys; empty or ``-`` marks
    an undefined ratio."""
    if spec is None:
        return None
    if isinstance(spec, Mapping):
        return asy.GrowthRegime(spec["a"], spec["b"], spec.get("r"), spec.get("s"))
    parts = [p for p in spec.split(",")]
    if len(parts) < 2 or len(parts) > 4:
        raise SchemaError(f"regime must be 'a,b[,r[,s]]', got {spec!r}")
    try:
        a, b = float(parts[0]), float(parts[1])
        r = _opt_float(parts[2]) if len(parts) > 2 else None
        s = _opt_float(parts[3]) if len(parts) > 3 else None
    except ValueError:
        raise SchemaError(f"non-numeric regime component in {spec!r}") from None
    return asy.GrowthRegime(a, b, r, s)


def _linear_value(v: float) -> float | str:
    if v > _LOG_MAX:
        return "inf"
    if v < _LOG_MIN:
        return "0"
    return math.exp(v)


def _add_linear(outputs: dict[str, Any]) -> None:
    for key in [k for k in outputs if k.startswith("log_") and k[4:] not in outputs]:
        outputs[key[4:]] = _linear_value(outputs[key])


def _estimate_delta(n: int, p: int, i: int, rss_i: float, rss_p: float) -> float:
    # Moment estimate: E[(RSS_i - RSS_p)/n] = sigma^2 (delta + (p - i)/n),
    # sigma^2 estimated by RSS_p / (n - p).
    if p == i or rss_p <= 0:
        return 0.0
    sigma2 = rss_p / (n - p)
    return max((rss_i - rss_p) / (n * sigma2) - (p - i) / n, 0.0)


def _compare(y: np.ndarray, X: DesignMatrix, nested: int, regime, delta, linear: bool,
             warnings_out: list[str]) -> dict[str, Any]:
    pair = build_nested_pair(X, nested)
    fit = bip_statistic(pair, y)
    res = log_intrinsic_bf(pair.n, pair.p, pair.i, fit.log_bip)
    if not res.converged:
        warnings_out.append(f"quadrature not converged (est_error={res.est_error:.3e})")
    if fit.raw_bip > 1.0:
        warnings_out.append(f"B_ip clamped to 1 from raw value {fit.raw_bip!r}")
    delta_hat = _estimate_delta(pair.n, pair.p, pair.i, fit.rss_reduced, fit.rss_full)
    out: dict[str, Any] = {
        "n": pair.n,
        "p": pair.p,
        "i": pair.i,
        "rss_reduced": fit.rss_reduced,
        "rss_full": fit.rss_full,
        "bip": fit.bip,
        "log_bip": fit.log_bip,
        "log_bf_intrinsic": res.log_bf_intrinsic,
        "log_bic": res.log_bic,
        "delta_hat": delta_hat,
        "quadrature": {
            "nodes_used": res.nodes_used,
            "converged": res.converged,
            "est_error": res.est_error,
        },
    }
    if regime is not None:
        d = delta_hat if delta is None else float(delta)
        v = asy.classify(regime, d)
        out["verdict"] = {
            "verdict": v.verdict.value,
            "threshold_used": v.threshold_used,
            "margin": v.margin,
            "delta_used": d,
        }
    if linear:
        _add_linear(out)
    return out


_SCHEMAS: dict[str, tuple[set[str], set[str]]] = {
    "compare": ({"data", "response", "nested_cols"}, {"regime", "delta", "linear"}),
    "threshold": (set(), {"r", "s", "t", "berger_replicates"}),
    "simulate": (
        {"delta", "b", "n_grid", "replicates"},
        {"r", "a", "s", "seed", "null", "workers"},
    ),
    "anova": (
        {"data", "factors"},
        {"response", "three_way", "nested_order", "regime", "delta", "linear"},
    ),
}


def _validate(command: str, args: Mapping[str, Any]) -> dict[str, Any]:
    if command not in _SCHEMAS:
        raise SchemaError(f"unknown command {command!r}; expected one of {sorted(_SCHEMAS)}")
    required, optional = _SCHEMAS[command]
    given = {k for k, v in args.items() if v is not None}
    missing = required - given
    if missing:
        raise SchemaError(f"{command}: missing argument(s) {sorted(missing)}")
    unknown = set(args) - required - optional
    if unknown:
        raise SchemaError(f"{command}: unknown argument(s) {sorted(unknown)}")
    return {k: v for k, v in args.items() if v is not None}


def _cmd_compare(a: dict, warnings_out: list[str]) -> dict[str, Any]:
    ds = parse_dataset(a["data"], a["response"])
    return _compare(
        ds.y, ds.X, int(a["nested_cols"]), parse_regime(a.get("regime")),
        a.get("delta"), bool(a.get("linear", False)), warnings_out,
    ) | {"columns": list(ds.column_names)}


def _cmd_threshold(a: dict, warnings_out: list[str]) -> dict[str, Any]:
    r_grid = parse_grid(a.get("r", "1.5,2,3,5,10"))
    s_grid = parse_grid(a["s"]) if "s" in a else []
    t_grid = parse_grid(a["t"]) if "t" in a else []
    m = a.get("berger_replicates", 1)
    rows = []
    blank = {"r": None, "s": None, "t": None, "m": None}
    for r in r_grid:
        rows.append(blank | {"kind": "delta_r", "r": r, "threshold": asy.delta_r(r)})
        for s in s_grid:
            if s > r:
                rows.append(blank | {"kind": "delta_rs", "r": r, "s": s,
                                     "threshold": asy.delta_rs(r, s)})
            else:
                warnings_out.append(f"skipped s={s} <= r={r}")
    for t in t_grid:
        rows.append(blank | {"kind": "berger_R", "t": t, "m": m,
                             "threshold": asy.berger_bound_R(t, m)})
    rows = [{k: row[k] for k in ("kind", "r", "s", "t", "m", "threshold")} for row in rows]
    return {"rows": rows}


def _cmd_simulate(a: dict, warnings_out: list[str]) -> dict[str, Any]:
    b = float(a["b"])
    if b == 1.0 and "r" not in a:
        raise SchemaError("simulate: r is required when b = 1")
    r = float(a["r"]) if b == 1.0 else None
    if b < 1.0 and "r" in a:
        warnings_out.append("r ignored because b < 1")
    regime = asy.GrowthRegime(float(a.get("a", 0.0)), b, r, a.get("s"))
    cfg = ExperimentConfig(
        regime=regime,
        delta_target=float(a["delta"]),
        n_grid=tuple(parse_grid(a["n_grid"], integer=True)),
        replicates=int(a["replicates"]),
        seed=int(a.get("seed", DEFAULT_SEED)),
        null_sampling=bool(a.get("null", False)),
    )
    records = run_experiment(cfg, workers=int(a.get("workers", 1)))
    rows = [row for rec in records for row in rec.rows()]
    stack = {k: np.vstack([getattr(rec, k) for rec in records])
             for k in ("log_bf", "log_bic", "bip")}
    summary = [
        {
            "n": int(records[0].n[k]),
            "p": int(records[0].p[k]),
            "i": int(records[0].i[k]),
            "median_log_bf": float(np.median(stack["log_bf"][:, k])),
            "median_log_bic": float(np.median(stack["log_bic"][:, k])),
            "mean_bip": float(np.mean(stack["bip"][:, k])),
        }
        for k in range(len(cfg.n_grid))
    ]
    out: dict[str, Any] = {"rows": rows, "summary": summary}
    if not cfg.null_sampling:
        v = asy.classify(regime, cfg.delta_target)
        out["predicted"] = {
            "verdict": v.verdict.value,
            "threshold_used": v.threshold_used,
            "margin": v.margin,
            "bip_limit": asy.bip_limit(regime, cfg.delta_target),
        }
    return out


def _cmd_anova(a: dict, warnings_out: list[str]) -> dict[str, Any]:
    factors = a["factors"]
    if isinstance(factors, str):
        factors = [f.strip() for f in factors.split(",") if f.strip()]
    response = a.get("response", "y")
    header, rows = read_csv_table(a["data"])
    for name in [response, *factors]:
        if name not in header:
            raise MissingColumn(f"{a['data']}: column {name!r} not in header")
    if not rows:
        raise ParseError(f"{a['data']}: no data rows")
    codes, levels = [], []
    for f in factors:
        col = [row[header.index(f)].strip() for row in rows]
        labels = list(dict.fromkeys(col))
        if len(labels) < 2:
            raise SchemaError(f"factor {f!r} has fewer than 2 levels")
        codes.append(np.array([labels.index(v) for v in col]))
        levels.append(len(labels))
    yc = header.index(response)
    try:
        y = np.array([float(row[yc]) for row in rows])
    except ValueError:
        bad = next(k for k, row in enumerate(rows) if not _is_float(row[yc]))
        raise ParseError(
            f"{a['data']}: row {bad + 2}, column {response!r}: non-numeric value",
            row=bad + 2, column=response,
        ) from None
    max_order = len(factors) if a.get("three_way", True) else min(len(factors), 2)
    X, terms = effect_coded_design(codes, levels, max_order)
    nested_order = int(a.get("nested_order", 0))
    nested = sum(1 for t in terms if len(t) <= nested_order)
    out = _compare(y, X, nested, parse_regime(a.get("regime")), a.get("delta"),
                   bool(a.get("linear", False)), warnings_out)
    out["design"] = {
        "factors": list(factors),
        "levels": levels,
        "max_order": max_order,
        "terms": [":".join(factors[j] for j in t) or "(intercept)" for t in terms],
    }
    return out


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


_DISPATCH = {
    "compare": _cmd_compare,
    "threshold": _cmd_threshold,
    "simulate": _cmd_simulate,
    "anova": _cmd_anova,
}


def execute(command: str, args: Mapping[str, Any]) -> CommandResult:
    """Run ``command`` with validated ``args``.

    Module errors propagate with the command name prefixed to the message.
    """
    a = _validate(command, args)
    warnings_out: list[str] = []
    try:
        outputs = _DISPATCH[command](a, warnings_out)
    except SchemaError:
        raise
    except IntrinsicBFError as exc:
        exc.args = (f"{command}: {exc}",) + exc.args[1:]
        raise
    return CommandResult(command, dict(a), outputs, warnings_out)
