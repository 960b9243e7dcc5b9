"""Access to the benchmark case files shipped with the package."""

from importlib import resources
from pathlib import Path

from .grid_model import Grid, parse_case

BUILTIN_CASES = ("bench23", "bench118")


def case_path(name: str) -> Path:
    """Filesystem path of a shipped case ("bench23" or "bench118")."""
    if name not in BUILTIN_CASES:
        raise ValueError(f"unknown case {name!r}; available: {BUILTIN_CASES}")
    return Path(str(resources.files("zonefault") / "data" / f"{name}.m"))


def load_builtin_case(name: str) -> Grid:
    """Parse a shipped case. Emits the usual simplification warning, since
    the files deliberately carry shunt/charging/tap data the model drops."""
    return parse_case(case_path(name).read_text())
