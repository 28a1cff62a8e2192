"""
Entry point for the geodesic CNN pipeline: python run.py <precompute|train|apply|eval> [flags]
"""
import sys

from app.main import main

if __name__ == "__main__":
    sys.exit(main())
