"""Monte Carlo sweep of every perturbation bound through the CLI entry point.

Prints one summary line per check; exits non-zero if any checked instance
violates its bound.
"""
import io
import json
import sys
from contextlib import redirect_stderr, redirect_stdout

from identreg.cli import main as cli

RUNS = [
    ("wei", "random", "pls"),
    ("algorithm", "random", "pls"),
    ("algorithm", "random", "pcr"),
    ("algorithm", "random", "fss"),
    ("ladder-risk", "random", "pls"),
    ("population", "toy", "pls"),
    ("early-stopping", "random", "pls"),
]


def main(samples: int = 200, seed: int = 0) -> int:
    bad = 0
    for theorem, source, kind in RUNS:
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = cli(["verify-bounds", "--theorem", theorem, "--source", source, "--kind", kind,
                        "--samples", str(samples), "--seed", str(seed)])
        s = json.loads(out.getvalue())["summary"] if code == 0 else {}
        ok = code == 0 and s["holds_rate"] in (None, 1.0)
        bad += not ok
        print(f"{theorem:<15} {kind:<4} checked={s.get('n_checked')}/{s.get('n_reports')} "
              f"holds_rate={s.get('holds_rate')} worst_ratio={s.get('worst_ratio')}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(*(int(a) for a in sys.argv[1:3])))
