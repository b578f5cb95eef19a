"""Tables printed as aligned text and written as CSV."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field


def fmt(value, places: int = 1) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, float):
        return f"{value:.{places}f}"
    return str(value)


@dataclass
class Table:
    headers: list[str]
    rows: list[list] = field(default_factory=list)
    title: str = ""

    def add(self, *cells) -> None:
        self.rows.append(list(cells))

    def to_text(self) -> str:
        cells = [self.headers] + [[str(c) for c in row] for row in self.rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(self.headers))]
        lines = [self.title] if self.title else []
        for k, row in enumerate(cells):
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
            if k == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.headers)
        writer.writerows(self.rows)
        return buf.getvalue()
