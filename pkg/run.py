#!/usr/bin/env python3
"""
Main entry point for the radial solver command line.
Run with: python run.py <command> [options]
"""
import sys

from dotenv import load_dotenv

from src.main import main

if __name__ == "__main__":
    # Load .env file if present so placeholders in config.yaml can use it
    load_dotenv()
    sys.exit(main())
