"""Command-line entry point.

    mmtrack run --experiment mse --m 4 8 --realizations 50 --out mse.csv
    mmtrack plotdata mse.csv --out mse_plot.csv

Every :class:`~mmtrack.config.RunConfig` field is also a flag
(``delta_deg`` -> ``--delta-deg``; ``m_values`` -> ``--m``). Result files
carry their configuration in the header, so ``--config`` accepts a previous
result file as well as a JSON config.
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import fields

from mmtrack import __version__
from mmtrack.config import EXPERIMENTS, FORMATS, ConfigError, RunConfig, build_config, load_config_file
from mmtrack.experiments import RUNNERS, complexity_report

log = logging.getLogger("mmtrack")

COLUMNS = (
    "experiment",
    "estimator",
    "m",
    "snr_db",
    "scenario",
    "n_t",
    "n_r",
    "g_t",
    "g_r",
    "block",
    "mse",
    "mse_db",
    "rate_bps_hz",
    "tracking_macs",
    "tracking_predicted_macs",
    "tracking_iterations",
    "tracking_columns",
    "realizations",
    "stream_checksum",
)

_FLAG_ALIASES = {"m_values": "--m"}


def _flag(name):
    return _FLAG_ALIASES.get(name, "--" + name.replace("_", "-"))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def embedded_config(cfg):
    return cfg.echo()


def record_rows(rec):
    """Aggregate row plus one row per block for a record."""
    ops = rec.op_counts or {}
    base = {
        "experiment": rec.experiment,
        "estimator": rec.estimator,
        "m": rec.cell.get("m"),
        "snr_db": rec.cell.get("snr_db"),
        "scenario": rec.cell.get("scenario"),
        "n_t": rec.cell.get("n_t"),
        "n_r": rec.cell.get("n_r"),
        "g_t": rec.cell.get("g_t"),
        "g_r": rec.cell.get("g_r"),
        "realizations": ops.get("realizations", len(rec.per_realization_mse or rec.per_realization_rate or [])),
        "stream_checksum": rec.stream_checksum,
    }
    agg = dict(
        base,
        block="all",
        mse=rec.mean_mse,
        mse_db=rec.mean_mse_db,
        rate_bps_hz=rec.mean_rate_bps_hz,
        tracking_macs=ops.get("tracking_macs"),
        tracking_predicted_macs=ops.get("tracking_predicted_macs"),
        tracking_iterations=ops.get("tracking_iterations"),
        tracking_columns=ops.get("tracking_columns"),
    )
    rows = [agg]
    for n, v in enumerate(rec.per_block_mse or [], start=1):
        rows.append(dict(base, block=n, mse=v, mse_db=10 * math.log10(v) if v > 0 else -math.inf))
    for n, v in enumerate(rec.per_block_rate or [], start=1):
        rows.append(dict(base, block=n, rate_bps_hz=v))
    return rows


def render_csv(cfg, records, status):
    buf = io.StringIO()
    buf.write(f"# mmtrack {__version__}\n")
    buf.write(f"# status: {status}\n")
    buf.write("# config: " + json.dumps(embedded_config(cfg), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in records:
        for row in record_rows(rec):
            w.writerow([_fmt(row.get(c)) for c in COLUMNS])
    return buf.getvalue()


def render_json(cfg, records, status):
    doc = {
        "version": __version__,
        "status": status,
        "config": embedded_config(cfg),
        "records": [r.to_dict() for r in records],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_result(path, cfg, records, status):
    """Write atomically so an interrupted run always leaves a readable file."""
    text = (render_json if cfg.format == "json" else render_csv)(cfg, records, status)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_result(path):
    """Return ``(config dict, status, aggregate rows)`` from a CSV or JSON result file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        rows = []
        for rec in doc["records"]:
            rows.append(
                {
                    "experiment": rec["experiment"],
                    "estimator": rec["estimator"],
                    **rec["cell"],
                    "mse_db": rec["mean_mse_db"],
                    "rate_bps_hz": rec["mean_rate_bps_hz"],
                }
            )
        return doc["config"], doc["status"], rows
    config, status = None, None
    body = []
    for line in text.splitlines():
        if line.startswith("# config: "):
            config = json.loads(line[len("# config: ") :])
        elif line.startswith("# status: "):
            status = line[len("# status: ") :]
        elif not line.startswith("#"):
            body.append(line)
    if config is None:
        raise ValueError(f"{path}: no embedded config; not an mmtrack result file")
    rows = [r for r in csv.DictReader(body) if r["block"] == "all"]
    for r in rows:
        for k in ("m", "n_t", "n_r"):
            r[k] = int(r[k])
        for k in ("snr_db", "mse_db", "rate_bps_hz"):
            r[k] = float(r[k]) if r[k] != "" else None
    return config, status, rows


def plot_tables(config, rows):
    """Long-format plotting tables: ``{name: (columns, rows)}``."""
    exp = config["experiment"]
    if exp == "rate":
        cols = ("snr_db", "estimator", "M", "N", "rate")
        out = [(r["snr_db"], r["estimator"], r["m"], r["n_t"], r["rate_bps_hz"]) for r in rows]
        out.sort(key=lambda t: (t[2], t[1], t[0]))
        return {"rate": (cols, out)}
    cols = ("M", "estimator", "scenario", "mse_db")
    out = [(r["m"], r["estimator"], r["scenario"], r["mse_db"]) for r in rows]
    out.sort(key=lambda t: (t[2], t[1], t[0]))
    return {"mse": (cols, out)}


def _table_text(cols, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def summary_table(cfg, records):
    lines = []
    if cfg.experiment == "rate":
        lines.append(f"{'estimator':<10}{'M':>4}{'SNR dB':>9}{'rate b/s/Hz':>14}")
        for r in records:
            lines.append(f"{r.estimator:<10}{r.cell['m']:>4}{r.cell['snr_db']:>9.1f}{r.mean_rate_bps_hz:>14.3f}")
    else:
        lines.append(f"{'estimator':<10}{'M':>4}{'SNR dB':>9}{'MSE dB':>10}")
        for r in records:
            lines.append(f"{r.estimator:<10}{r.cell['m']:>4}{r.cell['snr_db']:>9.1f}{r.mean_mse_db:>10.2f}")
    if cfg.experiment == "complexity":
        lines.append("")
        lines.append(f"{'estimator':<10}{'M':>4}{'cols':>7}{'MAC/iter':>12}{'measured/predicted':>20}")
        for row in complexity_report(records):
            if row["kind"] == "estimator":
                lines.append(
                    f"{row['estimator']:<10}{row['m']:>4}{row['columns']:>7}"
                    f"{row['macs_per_iteration']:>12.0f}{row['measured_over_predicted']:>20.3f}"
                )
            else:
                lines.append(
                    f"{row['estimator']:<10}{row['m']:>4}  per-iteration ratio {row['measured_ratio']:.1f}"
                    f" vs G_T G_R/(L^2 Gbar_T Gbar_R) = {row['predicted_ratio']:.1f}"
                )
    return "\n".join(lines)


def config_values(path):
    """Flat config mapping from a JSON config, a JSON result or a CSV result file."""
    with open(path, encoding="utf-8") as fh:
        head = fh.read(1)
    if head == "#":
        return read_result(path)[0]
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict) and {"version", "status", "config", "records"} <= set(data):
        return dict(data["config"])
    return load_config_file(path)


def _add_run_args(p):
    p.add_argument("--config", help="JSON config file or a previous result file")
    for f in fields(RunConfig):
        flag = _flag(f.name)
        kw = {"dest": f.name, "default": None}
        if f.name in ("m_values", "snr_db", "estimators"):
            kw["nargs"] = "+"
        if f.name == "experiment":
            kw["choices"] = EXPERIMENTS
        if f.name == "format":
            kw["choices"] = FORMATS
        p.add_argument(flag, **kw)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress per cell")


def build_parser():
    parser = argparse.ArgumentParser(prog="mmtrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mmtrack {__version__}")
    sub = parser.add_subparsers(dest="command")
    _add_run_args(sub.add_parser("run", help="run an experiment and write a result file"))
    pd = sub.add_parser("plotdata", help="long-format plotting tables from a result file")
    pd.add_argument("result")
    pd.add_argument("--out", help="output CSV (default: stdout)")
    return parser


def _parse_overrides(ns):
    overrides = {}
    for f in fields(RunConfig):
        v = getattr(ns, f.name, None)
        if v is not None:
            overrides[f.name] = v
    return overrides


def run_command(ns, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        values = config_values(ns.config) if ns.config else {}
        values.update(_parse_overrides(ns))
        cfg = build_config(values)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"mmtrack: config error: {exc}", file=stderr)
        return 2
    records = []
    status = "partial"
    try:
        for rec in RUNNERS[cfg.experiment](cfg):
            records.append(rec)
            if cfg.out:
                write_result(cfg.out, cfg, records, "partial")
        status = "complete"
    except KeyboardInterrupt:
        print("mmtrack: interrupted; partial results kept", file=stderr)
        return 130
    except Exception as exc:  # noqa: BLE001 - any failure must leave a diagnostic and exit nonzero
        print(f"mmtrack: run failed: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    finally:
        if cfg.out and status != "complete":
            write_result(cfg.out, cfg, records, "partial")
    if cfg.out:
        write_result(cfg.out, cfg, records, status)
    else:
        text = (render_json if cfg.format == "json" else render_csv)(cfg, records, status)
        stdout.write(text)
    print(summary_table(cfg, records), file=stderr if not cfg.out else stdout)
    return 0


def plotdata_command(ns, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        config, status, rows = read_result(ns.result)
    except (OSError, ValueError, KeyError) as exc:
        print(f"mmtrack: cannot read result: {exc}", file=stderr)
        return 1
    if status != "complete":
        print(f"mmtrack: warning: result status is {status!r}", file=stderr)
    text = "".join(_table_text(cols, out) for cols, out in plot_tables(config, rows).values())
    if ns.out:
        with open(ns.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("-") and argv[0] not in ("-h", "--help", "--version"):
        argv.insert(0, "run")
    ns = build_parser().parse_args(argv)
    if ns.command is None:
        build_parser().print_help()
        return 2
    if ns.command == "plotdata":
        return plotdata_command(ns)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    return run_command(ns)


if __name__ == "__main__":
    sys.exit(main())
