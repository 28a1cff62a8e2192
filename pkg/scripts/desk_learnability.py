#!/usr/bin/env python3
"""
Desk-scale learnability experiment.

Two isometrically bent copies of a ~500 vertex surface share identity ground
truth. A reduced correspondence network and a GCNN1 descriptor network are
trained for 500 Adadelta updates each and compared with their untrained
state and with raw geometry vectors.

Usage: python scripts/desk_learnability.py [--updates N] [--seed S]
"""
import argparse
import logging
import os
import sys

# Load environment variables FIRST
from dotenv import load_dotenv
load_dotenv()

# Ensure project root is on sys.path so `import app` works when running
# this script from the `scripts/` directory.
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from app.services.learnability import run_learnability

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

GRID_SIZE = 22


def main():
    """Run both experiments and report pass / fail per criterion."""
    parser = argparse.ArgumentParser(description="Desk-scale learnability experiment")
    parser.add_argument("--updates", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print("\n" + "=" * 60)
    print("Desk-Scale Learnability")
    print("=" * 60 + "\n")

    report = run_learnability(GRID_SIZE, args.updates, args.seed)
    checks = report.checks()
    failed = 0
    for name, ok, detail in checks:
        print(f"  {'✓' if ok else '✗'} {name}: {detail}")
        failed += not ok

    print("\n" + "=" * 60)
    print(f"{len(checks) - failed}/{len(checks)} criteria met on {report.vertices} vertices in {report.seconds:.1f}s")
    print("=" * 60 + "\n")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
