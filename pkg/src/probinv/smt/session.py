"""SMT-LIB2 sessions with an external solver process over stdio."""
from __future__ import annotations

import itertools
import os
import select
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional

ENV_SOLVER = "PROBINV_SOLVER"


class SmtError(RuntimeError):
    """The solver rejected a command or produced output we cannot read."""


@dataclass
class SolverOptions:
    command: Optional[str] = None      # executable path or full command line
    timeout_ms: Optional[int] = None   # per check-sat
    dump_dir: Optional[str] = None     # directory receiving every emitted script
    seed: Optional[int] = 0

    def argv(self) -> list[str]:
        cmd = self.command or os.environ.get(ENV_SOLVER) or shutil.which("z3")
        if not cmd:
            raise SmtError("no SMT solver found: install z3 or set " + ENV_SOLVER)
        argv = shlex.split(cmd)
        if len(argv) == 1 and "z3" in os.path.basename(argv[0]):
            argv += ["-in", "-smt2"]
        return argv


_DEFAULT = SolverOptions()
_counter = itertools.count()


def set_default_options(opts: SolverOptions) -> None:
    global _DEFAULT
    _DEFAULT = opts


def default_options() -> SolverOptions:
    return _DEFAULT


# -- s-expressions ---------------------------------------------------------------

def parse_sexpr(text: str):
    tokens: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "()":
            tokens.append(ch)
            i += 1
        elif ch.isspace():
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            tokens.append(text[i:j + 1])
            i = j + 1
        elif ch == '"':
            j = i + 1
            while True:
                j = text.index('"', j)
                if j + 1 < len(text) and text[j + 1] == '"':
                    j += 2
                    continue
                break
            tokens.append(text[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append(text[i:j])
            i = j
    pos = 0

    def read():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            out = []
            while tokens[pos] != ")":
                out.append(read())
            pos += 1
            return out
        return tok

    return read()


def sexpr_value(e) -> Fraction | bool:
    """Decode a numeral/decimal/rational model value exactly."""
    if isinstance(e, str):
        if e == "true":
            return True
        if e == "false":
            return False
        return Fraction(e)
    head = e[0]
    if head == "-" and len(e) == 2:
        return -sexpr_value(e[1])
    if head == "/" and len(e) == 3:
        return sexpr_value(e[1]) / sexpr_value(e[2])
    if head == "to_real" and len(e) == 2:
        return sexpr_value(e[1])
    raise SmtError(f"cannot decode model value {e!r}")


# -- session -----------------------------------------------------------------------

class SmtSession:
    """One solver process; commands are written as SMT-LIB2 text."""

    def __init__(self, options: SolverOptions | None = None, logic: str | None = None, label: str = "s"):
        self.options = options or _DEFAULT
        argv = self.options.argv()
        try:
            self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.STDOUT)
        except OSError as exc:
            raise SmtError(f"cannot start solver {argv[0]!r}: {exc.strerror}") from exc
        self._buf = b""
        self._dump = None
        self.dead = False
        self.declared: dict[str, str] = {}
        self._scopes: list[set[str]] = []
        self.checks = 0
        if self.options.dump_dir:
            Path(self.options.dump_dir).mkdir(parents=True, exist_ok=True)
            name = f"{label}-{os.getpid()}-{next(_counter):04d}.smt2"
            self._dump = open(Path(self.options.dump_dir) / name, "w")
        self.send("(set-option :print-success false)")
        self.send("(set-option :produce-models true)")
        if self.options.seed is not None and "z3" in os.path.basename(self.options.argv()[0]):
            self.send(f"(set-option :random-seed {int(self.options.seed)})")
        if self.options.timeout_ms and "z3" in os.path.basename(self.options.argv()[0]):
            self.send(f"(set-option :timeout {int(self.options.timeout_ms)})")
        if logic:
            self.send(f"(set-logic {logic})")

    # -- plumbing -------------------------------------------------------------
    def send(self, cmd: str) -> None:
        if self.dead:
            raise SmtError("solver session is closed")
        if self._dump:
            self._dump.write(cmd + "\n")
        try:
            self.proc.stdin.write(cmd.encode() + b"\n")
        except BrokenPipeError as exc:
            self.dead = True
            raise SmtError("solver process died") from exc

    def _flush(self) -> None:
        try:
            self.proc.stdin.flush()
        except BrokenPipeError as exc:
            self.dead = True
            raise SmtError("solver process died") from exc

    def _read_line(self, deadline: Optional[float]) -> Optional[str]:
        fd = self.proc.stdout.fileno()
        while b"\n" not in self._buf:
            wait = None if deadline is None else max(0.0, deadline - time.monotonic())
            ready, _, _ = select.select([fd], [], [], wait)
            if not ready:
                return None
            chunk = os.read(fd, 65536)
            if not chunk:
                self.dead = True
                raise SmtError("solver process terminated: " + self._buf.decode(errors="replace"))
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode()

    def _read_sexpr(self, deadline: Optional[float]) -> Optional[str]:
        text = ""
        depth = 0
        while True:
            line = self._read_line(deadline)
            if line is None:
                return None
            text += line + "\n"
            depth += line.count("(") - line.count(")")
            if depth <= 0 and text.strip():
                return text.strip()

    def _kill(self) -> None:
        self.dead = True
        try:
            self.proc.kill()
            self.proc.wait(timeout=5)
        except Exception:
            pass

    # -- commands -------------------------------------------------------------
    def declare(self, name: str, sort: str) -> None:
        if name in self.declared:
            if self.declared[name] != sort:
                raise SmtError(f"{name} redeclared with sort {sort}")
            return
        self.declared[name] = sort
        if self._scopes:
            self._scopes[-1].add(name)
        self.send(f"(declare-fun {name} () {sort})")

    def assert_(self, term: str) -> None:
        self.send(f"(assert {term})")

    def push(self) -> None:
        self._scopes.append(set())
        self.send("(push 1)")

    def pop(self) -> None:
        for name in self._scopes.pop():
            del self.declared[name]
        self.send("(pop 1)")

    def check(self, timeout_ms: Optional[int] = None) -> str:
        """Return ``sat``, ``unsat`` or ``unknown`` (timeouts and crashes count as unknown)."""
        timeout_ms = timeout_ms if timeout_ms is not None else self.options.timeout_ms
        self.checks += 1
        self.send("(check-sat)")
        self._flush()
        deadline = None if timeout_ms is None else time.monotonic() + timeout_ms / 1000.0 + 1.0
        line = self._read_sexpr(deadline)
        if line is None:
            self._kill()
            return "unknown"
        if line.startswith("(error"):
            raise SmtError(line)
        if line not in ("sat", "unsat", "unknown"):
            raise SmtError(f"unexpected solver answer: {line!r}")
        return line

    def get_values(self, names: Iterable[str]) -> dict[str, Fraction | bool]:
        names = list(names)
        if not names:
            return {}
        self.send("(get-value (" + " ".join(names) + "))")
        self._flush()
        text = self._read_sexpr(None)
        if text.startswith("(error"):
            raise SmtError(text)
        parsed = parse_sexpr(text)
        out = {}
        for pair in parsed:
            if not isinstance(pair, list) or len(pair) != 2:
                raise SmtError(f"malformed model text: {text!r}")
            out[pair[0]] = sexpr_value(pair[1])
        return out

    def close(self) -> None:
        if self._dump:
            self._dump.close()
            self._dump = None
        if not self.dead:
            try:
                self.send("(exit)")
                self._flush()
                self.proc.wait(timeout=2)
            except Exception:
                self._kill()
            self.dead = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass
