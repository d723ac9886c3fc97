import csv
import io
import json
import math
import os

from core.transform import DecayCurve
from utils.errors import SchemaError
from utils.logger import Logger

DECAY_SCHEMA = "bendlab.decay.v1"
CLASSIFY_SCHEMA = "bendlab.classify.v1"
CURVATURE_SCHEMA = "bendlab.curvature.v1"

DECAY_COLUMNS = ["j", "a", "s", "b", "t1", "t2", "iota", "magnitude", "floored"]
CURVATURE_COLUMNS = ["radius", "b_hat", "K_hat", "inv_r"]


def _num(value):
    """Shortest round-trip text of a float."""
    return repr(float(value))


def _finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


class OutputFormatter:
    """Versioned CSV/JSON text for decay curves, classifications and curvature summaries"""

    def __init__(self):
        self.logger = Logger().get_logger('output_formatter')

    def decay_to_csv(self, curves, fitted_slope=None):
        """Long-format CSV; comment lines carry the schema tag, floor and fitted slope"""
        curves = list(curves)
        floor = curves[0].floor if curves else 1e-14
        out = io.StringIO()
        out.write(f"# schema: {DECAY_SCHEMA}\n")
        out.write(f"# floor: {_num(floor)}\n")
        if fitted_slope is not None:
            out.write(f"# fitted_slope: {_num(fitted_slope)}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(DECAY_COLUMNS)
        for curve in curves:
            for j, a, magnitude, floored in zip(curve.j, curve.scales, curve.magnitudes, curve.floored):
                writer.writerow([int(j), _num(a), _num(curve.s), _num(curve.b), _num(curve.t[0]),
                                 _num(curve.t[1]), int(curve.iota), _num(magnitude), int(bool(floored))])
        self.logger.debug(f"Formatted {len(curves)} decay curve(s) as CSV")
        return out.getvalue()

    def parse_decay_csv(self, text):
        """Return (curves, fitted_slope); fitted_slope is None when absent"""
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)

        schema = meta.get("schema")
        if schema != DECAY_SCHEMA:
            raise SchemaError(f"expected decay CSV schema {DECAY_SCHEMA!r}, found {schema!r}")
        floor = float(meta.get("floor", 1e-14))
        fitted = float(meta["fitted_slope"]) if "fitted_slope" in meta else None

        reader = csv.DictReader(body)
        if reader.fieldnames != DECAY_COLUMNS:
            raise SchemaError(f"unexpected decay CSV columns {reader.fieldnames}")

        groups = {}
        for row in reader:
            key = (float(row["s"]), float(row["b"]), float(row["t1"]), float(row["t2"]), int(row["iota"]))
            groups.setdefault(key, []).append(row)

        curves = []
        for (s, b, t1, t2, iota), rows in groups.items():
            values = [0.0 if int(r["floored"]) else float(r["magnitude"]) for r in rows]
            curves.append(DecayCurve([int(r["j"]) for r in rows], [float(r["a"]) for r in rows], values,
                                     s, b, (t1, t2), iota, floor=floor))
        return curves, fitted

    def decay_to_json(self, curves, fitted_slope=None):
        payload = {
            "schema": DECAY_SCHEMA,
            "fitted_slope": _finite_or_none(fitted_slope),
            "curves": [
                {
                    "s": float(c.s), "b": float(c.b), "t": [float(c.t[0]), float(c.t[1])], "iota": int(c.iota),
                    "alpha": float(c.alpha), "floor": float(c.floor), "generator": c.generator,
                    "j": [int(j) for j in c.j], "a": [float(a) for a in c.scales],
                    "values": [float(v) for v in c.values],
                    "magnitude": [float(m) for m in c.magnitudes],
                    "floored": [bool(f) for f in c.floored],
                }
                for c in curves
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def classification_to_json(self, results):
        payload = {"schema": CLASSIFY_SCHEMA, "results": []}
        for result in results:
            entry = result.to_dict()
            for key in ("rate", "residual", "curvature", "confidence"):
                entry[key] = _finite_or_none(entry[key])
            payload["results"].append(entry)
        return json.dumps(payload, indent=2, sort_keys=True)

    def parse_classification_json(self, text):
        try:
            payload = json.loads(text)
        except ValueError as e:
            raise SchemaError(f"classification output is not valid JSON: {e}") from e
        if not isinstance(payload, dict) or payload.get("schema") != CLASSIFY_SCHEMA:
            found = payload.get("schema") if isinstance(payload, dict) else None
            raise SchemaError(f"expected classification schema {CLASSIFY_SCHEMA!r}, found {found!r}")
        return payload["results"]

    def curvature_summary_to_csv(self, rows):
        out = io.StringIO()
        out.write(f"# schema: {CURVATURE_SCHEMA}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CURVATURE_COLUMNS)
        for row in rows:
            writer.writerow([_num(row[c]) for c in CURVATURE_COLUMNS])
        return out.getvalue()

    def parse_curvature_summary(self, text):
        lines = text.splitlines()
        if not lines or lines[0].strip() != f"# schema: {CURVATURE_SCHEMA}":
            raise SchemaError(f"expected curvature summary schema {CURVATURE_SCHEMA!r}")
        reader = csv.DictReader(lines[1:])
        return [{c: float(r[c]) for c in CURVATURE_COLUMNS} for r in reader]

    def save_to_file(self, content, file_path):
        """Write text output, creating the parent directory when needed"""
        directory = os.path.dirname(os.path.abspath(file_path))
        if not os.path.exists(directory):
            os.makedirs(directory)
        with open(file_path, 'w', encoding='utf-8', newline='') as f:
            f.write(content)
        self.logger.info(f"Saved output to {file_path}")
        return file_path
