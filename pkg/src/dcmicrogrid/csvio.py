"""
CSV time-series output.

Column order is fixed by ``COLUMNS``; floats are written with 6 significant
digits, ``,`` separators and ``\\n`` line endings. ``flags`` holds
``|``-separated flag names.
"""

from __future__ import annotations

import csv
import io

from .engine import SimRecord

__all__ = ["COLUMNS", "TEXT_COLUMNS", "format_value", "write_csv", "records_to_csv", "read_csv"]

# (CSV header, SimRecord attribute)
COLUMNS = (
    ("t_s", "t"),
    ("irradiance_wm2", "irradiance"),
    ("temperature_c", "temperature"),
    ("v_pv_v", "v_pv"),
    ("i_pv_a", "i_pv"),
    ("p_pv_kw", "p_pv"),
    ("pv_mode", "pv_mode"),
    ("p_pv_ref_kw", "p_pv_ref"),
    ("p_bat_kw", "p_bat"),
    ("p_bat_ref_kw", "p_bat_ref"),
    ("soc", "soc"),
    ("p_load_kw", "p_load"),
    ("p_grid_kw", "p_grid"),
    ("q_grid_kvar", "q_grid"),
    ("v_dc_v", "v_dc"),
    ("p_loss_kw", "p_loss"),
    ("p_cap_kw", "p_cap"),
    ("balance_residual_kw", "balance_residual"),
    ("case_label", "case_label"),
    ("flags", "flags"),
)
TEXT_COLUMNS = ("pv_mode", "case_label", "flags")


def format_value(value):
    if isinstance(value, str):
        return value
    if isinstance(value, tuple):
        return "|".join(value)
    if value == 0:
        return "0"
    return f"{value:.6g}"


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([header for header, _ in COLUMNS])
    for rec in records:
        writer.writerow([format_value(getattr(rec, attr)) for _, attr in COLUMNS])
    return buf.getvalue()


def write_csv(path, records):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))


def read_csv(path):
    """
    Read a CSV written by :func:`write_csv`.

    Returns a dict keyed by SimRecord attribute name; numeric columns are
    lists of floats, ``flags`` a list of tuples.
    """
    attr_of = dict(COLUMNS)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        expected = [h for h, _ in COLUMNS]
        if header != expected:
            raise ValueError(f"{path}: unexpected header; expected {','.join(expected)}")
        data = {attr: [] for _, attr in COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
            for (name, attr), cell in zip(COLUMNS, row):
                if attr == "flags":
                    data[attr].append(tuple(cell.split("|")) if cell else ())
                elif attr in TEXT_COLUMNS:
                    data[attr].append(cell)
                else:
                    try:
                        data[attr].append(float(cell))
                    except ValueError:
                        raise ValueError(f"{path}:{lineno}: bad number {cell!r} in {name}") from None
    return data


def columns_to_records(data):
    n = len(data["t"])
    return [SimRecord(**{attr: data[attr][i] for _, attr in COLUMNS}) for i in range(n)]
