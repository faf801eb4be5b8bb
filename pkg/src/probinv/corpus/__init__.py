"""Benchmark loops and their properties, shipped as package data."""
from __future__ import annotations

from importlib import resources

from ..pgcl import parse_program, parse_property
from ..pgcl.ast import LoopProgram


def _root():
    return resources.files(__name__)


def names() -> list[str]:
    return sorted(p.name[: -len(".pgcl")] for p in _root().iterdir() if p.name.endswith(".pgcl"))


def program_text(name: str) -> str:
    return (_root() / f"{name}.pgcl").read_text()


def property_text(name: str, k: int) -> str:
    return (_root() / f"{name}.{k}.prop").read_text()


def property_ids(name: str) -> list[int]:
    out = []
    for p in _root().iterdir():
        parts = p.name.split(".")
        if len(parts) == 3 and parts[0] == name and parts[2] == "prop":
            out.append(int(parts[1]))
    return sorted(out)


def load(name: str) -> LoopProgram:
    return parse_program(program_text(name))


def load_property(name: str, k: int, program: LoopProgram | None = None):
    """``(program, f, g)`` for property ``k`` of benchmark ``name``."""
    program = program or load(name)
    f, g = parse_property(property_text(name, k), program)
    return program, f, g
