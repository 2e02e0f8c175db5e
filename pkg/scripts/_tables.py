"""Plain-text pivot tables for results rows."""

from collections import defaultdict


def pivot(rows, row_keys, col_key, fmt="{:.3f}"):
    cells = defaultdict(dict)
    cols = []
    for r in rows:
        rk = tuple(getattr(r, k) for k in row_keys)
        c = getattr(r, col_key)
        if c not in cols:
            cols.append(c)
        cells[rk][c] = r.value
    head = [*row_keys, *map(str, cols)]
    lines = [head]
    for rk in sorted(cells):
        lines.append([str(x) for x in rk] + [fmt.format(cells[rk][c]) if c in cells[rk] else "-"
                                             for c in cols])
    widths = [max(len(line[i]) for line in lines) for i in range(len(head))]
    return "\n".join("  ".join(s.rjust(w) for s, w in zip(line, widths)) for line in lines)
