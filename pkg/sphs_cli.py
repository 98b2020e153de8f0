#!/usr/bin/env python3
"""
Stable port-Hamiltonian models
Main entry point for the CLI application
"""

import sys

from sphs.ui import main

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nInterrupted.")
        sys.exit(130)
