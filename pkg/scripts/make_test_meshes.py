#!/usr/bin/env python3
"""
Write the synthetic fixture meshes used by metadata/config.json.

Creates a jittered planar grid, two isometrically bent copies with identity
ground truth, an icosphere and an annulus under metadata/meshes/.

Usage: python scripts/make_test_meshes.py [--out DIR] [--size N]
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

import numpy as np

from app.core.paths import METADATA_DIR
from app.services.dataset import write_ground_truth
from app.services.mesh_io import write_mesh
from app.services.synthetic import annulus, bend_mesh, grid_plane, icosphere, jitter_planar

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


def main():
    """Generate the fixture meshes."""
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--out", default=str(METADATA_DIR / "meshes"))
    parser.add_argument("--size", type=int, default=22, help="grid vertices per side")
    args = parser.parse_args()

    print("\n" + "=" * 60)
    print("Synthetic Fixture Meshes")
    print("=" * 60 + "\n")

    out = args.out
    spacing = 1.0 / (args.size - 1)
    plane = jitter_planar(grid_plane(args.size, args.size, spacing), 0.15 * spacing, seed=7)
    # center the strip so the bend is symmetric
    plane = plane.transformed(np.eye(3), np.array([-0.5, -0.5, 0.0]))
    identity = range(plane.n_vertices)

    meshes = {
        "plane.off": plane,
        "plane_bent.off": bend_mesh(plane, 0.5),
        "plane_bent_wide.off": bend_mesh(plane, 1.0),
        "sphere.off": icosphere(3),
        "annulus.off": annulus(0.5, 1.0, 4, 32),
    }
    try:
        for name, mesh in meshes.items():
            path = write_mesh(mesh, os.path.join(out, name))
            print(f"  ✓ {path} ({mesh.n_vertices} vertices, {mesh.n_faces} faces)")
        for name in ("plane", "plane_bent", "plane_bent_wide"):
            write_ground_truth(os.path.join(out, f"{name}.gt"), identity)
        print("\n" + "=" * 60)
        print("Fixtures ready; run `python run.py precompute` next.")
        print("=" * 60 + "\n")
    except Exception as e:
        print(f"\n✗ ERROR: {e}")
        logger.exception("Fixture generation failed")
        sys.exit(1)


if __name__ == "__main__":
    main()
