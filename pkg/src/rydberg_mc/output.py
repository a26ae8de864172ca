"""CSV results: '#' metadata lines, one header row, full-precision data rows."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .config import CONFIG_PREFIX, ExperimentConfig
from .engine import ExperimentResult

FLOAT_FORMAT = "%.17g"


def header_columns(result: ExperimentResult) -> list[str]:
    cols = [result.abscissa_name]
    if result.series_name is not None:
        cols.append(result.series_name)
    for name in result.observables:
        cols += [f"{name}_mean", f"{name}_stderr"]
    return cols


def data_rows(result: ExperimentResult) -> list[list[float]]:
    rows = []
    n_series = max(len(result.series), 1)
    for s in range(n_series):
        for j, x in enumerate(result.abscissa):
            row = [x]
            if result.series_name is not None:
                row.append(result.series[s])
            for k in range(len(result.observables)):
                row += [result.mean[s, j, k], result.stderr[s, j, k]]
            rows.append(row)
    return rows


def format_csv(result: ExperimentResult, config: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# rydberg_mc {result.metadata.get('version', '')}\n")
    if config.description:
        buf.write(f"# description: {config.description}\n")
    buf.write(f"{CONFIG_PREFIX}{config.echo()}\n")
    buf.write(f"# seed: {config.plan.seed}\n")
    buf.write(f"# realizations: {result.realizations}\n")
    buf.write(f"# resample_count: {result.resample_count}\n")
    for key, value in result.metadata.items():
        if key != "version":
            buf.write(f"# {key}: {json.dumps(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header_columns(result))
    for row in data_rows(result):
        writer.writerow([FLOAT_FORMAT % v for v in row])
    return buf.getvalue()


def write_csv(path, result: ExperimentResult, config: ExperimentConfig) -> None:
    text = format_csv(result, config)
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_csv(path) -> tuple[dict[str, str], list[str], np.ndarray]:
    """Metadata (raw strings), column names and the data block of a results file."""
    meta, lines = {}, []
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                meta[key] = value
            elif line.strip():
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    data = np.array([[float(v) for v in row] for row in reader])
    return meta, columns, data.reshape(-1, len(columns))
