"""Prompt assets with ``{named slot}`` placeholders.

Slot names may contain spaces (``{rag context}``). Filling is a single pass
over the template, so braces inside slot values are left alone.
"""

import re
from functools import lru_cache
from importlib import resources

SLOT = re.compile(r"\{([A-Za-z0-9_ ]+)\}")


@lru_cache(maxsize=None)
def load(name: str) -> str:
    return resources.files(__package__).joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")


def slots(template: str) -> set[str]:
    return set(SLOT.findall(template))


def fill(template: str, values: dict) -> str:
    missing = slots(template) - values.keys()
    if missing:
        raise KeyError(f"unfilled prompt slots: {sorted(missing)}")
    return SLOT.sub(lambda m: str(values[m.group(1)]), template)


def render(name: str, **values) -> str:
    """Fill asset ``name``; underscores in keyword names also match spaces."""
    template = load(name)
    expanded = dict(values)
    for key, value in values.items():
        expanded.setdefault(key.replace("_", " "), value)
    return fill(template, expanded)
