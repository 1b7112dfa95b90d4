#!/usr/bin/env python3
"""
limclust command-line entry point: python limclust.py <subcommand> --help
"""

from src.cli.runner import main

if __name__ == "__main__":
    main()
