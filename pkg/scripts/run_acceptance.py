#!/usr/bin/env python3
"""Run the acceptance suite and print one PASS/FAIL line per criterion.

Thin wrapper over pytest so the criteria stay in version-controlled tests:

    python scripts/run_acceptance.py            # all twelve criteria
    python scripts/run_acceptance.py c04 c09    # a subset
"""

import subprocess
import sys


def main() -> int:
    selector = " or ".join(sys.argv[1:]) if len(sys.argv) > 1 else None
    cmd = [sys.executable, "-m", "pytest", "tests/test_acceptance.py", "-v", "-s"]
    if selector:
        cmd += ["-k", selector]
    return subprocess.call(cmd)


if __name__ == "__main__":
    sys.exit(main())
