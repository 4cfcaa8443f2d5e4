"""Flat key=value text format used for config files and warm-start records."""

from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from ..core.exceptions import ConfigError


def parse_kv(
    text: str, keep_comments: bool = False, source: str = "<text>"
) -> Union[Dict[str, str], Tuple[Dict[str, str], List[str]]]:
    """Parse key=value lines.

    Blank lines are skipped and ``#`` starts a comment. Later keys override
    earlier ones.

    Args:
        text: File contents
        keep_comments: Also return the comment bodies, in file order
        source: Name used in error messages

    Returns:
        The key/value mapping, plus the comment list when requested
    """
    values: Dict[str, str] = {}
    comments: List[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        values[key] = value.split(" #", 1)[0].strip()
    if keep_comments:
        return values, comments
    return values


def read_kv_file(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return parse_kv(path.read_text(), source=str(path))


def dump_kv(values: Mapping[str, object], comments: Optional[List[str]] = None) -> str:
    """Render a mapping as key=value lines; floats use repr so they round-trip."""
    lines = [f"# {c}" for c in comments or []]
    for key, value in values.items():
        rendered = repr(float(value)) if isinstance(value, float) else str(value)
        lines.append(f"{key}={rendered}")
    return "\n".join(lines) + "\n"
