"""Corpus runner: one subprocess per (benchmark, property, strategy, mode) cell."""
from __future__ import annotations

import csv
import json
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

COLUMNS = ["benchmark", "property", "strategy", "synth", "status", "counterexamples", "pieces", "rounds",
           "wall_time", "exit_code"]


def discover(corpus: str | Path) -> list[tuple[Path, Path]]:
    """``(program, property)`` file pairs, sorted by name and property number."""
    root = Path(corpus)
    if not root.is_dir():
        raise FileNotFoundError(f"not a directory: {root}")
    cells = []
    for prog in sorted(root.glob("*.pgcl")):
        stem = prog.name[: -len(".pgcl")]
        props = []
        for prop in root.glob(f"{stem}.*.prop"):
            k = prop.name[len(stem) + 1: -len(".prop")]
            if k.isdigit():
                props.append((int(k), prop))
        cells += [(prog, prop) for _, prop in sorted(props)]
    return cells


def run_cell(program: Path, prop: Path, strategy: str, mode: str, timeout: float, extra: Sequence[str] = ()) -> dict:
    row = {
        "benchmark": program.name[: -len(".pgcl")],
        "property": prop.name.split(".")[-2],
        "strategy": strategy,
        "synth": mode,
    }
    with tempfile.TemporaryDirectory() as tmp:
        report = Path(tmp) / "report.json"
        cmd = [sys.executable, "-m", "probinv", "synthesize", str(program), str(prop),
               "--strategy", strategy, "--synth", mode, "--timeout", str(timeout), "--json", str(report), *extra]
        start = time.monotonic()
        try:
            # a little slack over the in-process timeout for start-up and clean-up
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout + 30)
            code = proc.returncode
        except subprocess.TimeoutExpired:
            code = None
        elapsed = time.monotonic() - start
        data = json.loads(report.read_text()) if report.exists() else {}
    if code is None:
        status = "TO"
    elif data:
        status = data["status"]
        if status == "inconclusive" and "timeout" in (data.get("message") or ""):
            status = "TO"
    else:
        status = "error"
    row.update({
        "status": status,
        "counterexamples": data.get("counterexamples"),
        "pieces": data.get("pieces"),
        "rounds": len(data.get("rounds") or []) or None,
        "wall_time": round(data.get("wall_time", elapsed), 3),
        "exit_code": code,
    })
    return row


def run_bench(corpus, strategies: Iterable[str], modes: Iterable[str], timeout: float = 120.0,
              jobs: int = 1, extra: Sequence[str] = ()) -> list[dict]:
    cells = [(prog, prop, s, m) for prog, prop in discover(corpus) for s in strategies for m in modes]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(lambda c: run_cell(*c, timeout, extra), cells))


def write_csv(rows: list[dict], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r[k]) for k in COLUMNS})
