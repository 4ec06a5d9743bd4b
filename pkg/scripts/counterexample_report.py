"""Collective-attack counterexample at (3, 2) and (4, 3), as JSON lines.

    python3 scripts/counterexample_report.py
"""

import json

from boxlab.channels import verify_counterexample
from boxlab.fileio import dump_scalar


def main():
    for n, m in ((3, 2), (4, 3)):
        r = verify_counterexample(n, m)
        print(json.dumps({"n": n, "m": m, "roundns_value": dump_scalar(r.roundns_value),
                          "q_value": dump_scalar(r.q_value),
                          "twirled_value": dump_scalar(r.twirled_value),
                          "passed": r.passed, "runtime": round(r.runtime, 2)}))


if __name__ == "__main__":
    main()
