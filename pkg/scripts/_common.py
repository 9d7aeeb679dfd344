import argparse
import math
import os


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--threads", type=int, default=int(os.environ.get("DECONV_THREADS", "1")))
    p.add_argument("--seed", type=int, default=20240501)
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--csv", help="write the table here")
    return p


def show(rows, columns):
    print("  ".join(f"{c:>14}" for c in columns))
    for row in rows:
        cells = []
        for c in columns:
            v = row[c]
            cells.append(f"{v:>14d}" if isinstance(v, int) else f"{v:>14.6g}" if isinstance(v, float) and math.isfinite(v) else f"{v!s:>14}")
        print("  ".join(cells))
